def good_one(value):
    return value * 2


def broken(a, b:
    return a


class Holder:
    def method(self, key):
        return key

    def other(self) -> int:
        return 3
