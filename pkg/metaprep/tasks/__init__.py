from metaprep.tasks.stream import *
from metaprep.tasks.corpus import *
from metaprep.tasks.batch import *
from metaprep.tasks.masking import *
from metaprep.tasks.pairs import *
from metaprep.tasks.sampling import *
from metaprep.tasks.quadratic import *
