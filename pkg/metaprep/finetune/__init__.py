from metaprep.finetune.downstream import *
from metaprep.finetune.harness import *
from metaprep.finetune.study import *
