"""rwcert: numerical certification of the Robertson-Walker curvature form.

Feed it a semi-Riemannian metric and a distinguished unit vector field u; it
checks, at sampled points, whether the Riemann tensor splits into the two
plane invariants (f on planes containing u, h on planes orthogonal to u) and,
when it does, reconstructs the warped-product normal form: time function,
scale factor and spatial curvature sign.
"""

# version must exist before the submodules import it back
__version__ = "0.1.0"

from .certify import Certificate, CertifyConfig, certify
from .chart import ChartError, ChartSpec, load_chart
from .jets import Jet3

__all__ = [
    "Certificate",
    "CertifyConfig",
    "ChartError",
    "ChartSpec",
    "Jet3",
    "certify",
    "load_chart",
    "__version__",
]
