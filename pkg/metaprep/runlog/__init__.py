from metaprep.runlog.records import *
