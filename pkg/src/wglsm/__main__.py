import os

# one BLAS thread keeps floating-point results independent of --threads
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import sys  # noqa: E402

from .cli import main  # noqa: E402

sys.exit(main())
