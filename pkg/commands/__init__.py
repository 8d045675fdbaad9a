# commands/__init__.py

from commands.label import label_command
from commands.index import index_command
from commands.train import train_command
from commands.resolve import resolve_command
from commands.ranking import search_command, rerank_command, fuse_command
from commands.evaluate import eval_command
from commands.pipeline import pipeline_command

commands = [
    label_command,
    index_command,
    train_command,
    resolve_command,
    search_command,
    rerank_command,
    fuse_command,
    eval_command,
    pipeline_command,
]
