import os


def a():
    return 1


def b(x, y=2):
    z = x + y
    return z
