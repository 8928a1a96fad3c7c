from metaprep.cli.config import *
from metaprep.cli.commands import *
from metaprep.cli.gradcheck import *
from metaprep.cli.experiment import *
