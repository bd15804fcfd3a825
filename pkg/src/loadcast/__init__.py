"""Load planning for intermodal trains: exact solver, instance generators and learned predictors."""

__version__ = "0.1.0"
