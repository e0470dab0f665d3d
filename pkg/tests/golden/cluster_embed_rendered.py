"""Generated embedding job; parameters are mirrored in job_spec.json."""
import sys

from playground_worker.jobs import run_embedding

EMBEDDING_DIM = 64
MOCK_MODE = True

if __name__ == "__main__":
    sys.exit(run_embedding(sys.argv[1]))
