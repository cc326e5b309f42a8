from . import models
from .models import User as U


class View:
    pass
