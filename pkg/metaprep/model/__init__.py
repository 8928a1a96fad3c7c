from metaprep.model.config import *
from metaprep.model.encoder import *
from metaprep.model.heads import *
from metaprep.model.checkpoint import *
