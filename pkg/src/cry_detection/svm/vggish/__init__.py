# Functions for handling externally extracted embedding files

from .read_embeddings import EMBEDDING_SIZE, load_embeddings
