from typing import List, Optional
from requests import Session, get
from d import *
import c


def run(session):
    return session
