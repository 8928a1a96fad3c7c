from metaprep.metatrain.config import *
from metaprep.metatrain.objective import *
from metaprep.metatrain.inner import *
from metaprep.metatrain.optimizer import *
from metaprep.metatrain.trainer import *
from metaprep.metatrain.state import *
