class IDMap:
    def __init__(self):
        self.items = {}


class IDMapKey:
    pass
