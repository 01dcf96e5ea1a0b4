"""stepchat: a task-oriented conversational assistant engine."""

__version__ = "0.1.0"
