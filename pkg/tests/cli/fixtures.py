from pathlib import Path

TINY_CONFIG = """\
run.run_id = "tiny"
run.seed = 0

meta.k = 1
meta.alpha = 0.1
meta.beta = 0.01
meta.total_meta_test_steps = 10
meta.checkpoint_every = 4

model.vocab_size = 16
model.max_len = 16
model.d_model = 8
model.n_heads = 2
model.n_layers = 1
model.d_ff = 16

data.batch_size = 2
data.max_len = 16
data.n_docs = 10
data.n_topics = 4
data.min_sentence = 2
data.max_sentence = 4

finetune.epochs = 1

downstream.kinds = ["PAIR_CLS"]
downstream.sizes = [32, 32, 32]
downstream.seeds = [0]

tasks.MLM = 0.5
tasks.NSP = 0.5
"""


def write_tiny_config(directory, text: str = TINY_CONFIG) -> Path:
    path = Path(directory) / 'config.toml'
    path.write_text(text)
    return path
