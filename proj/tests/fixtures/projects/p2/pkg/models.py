from typing import Dict


class User:
    name = ""


class Group(object):
    members = []


Alias = Dict[str, int]
MAX_USERS = 100
helper = User
