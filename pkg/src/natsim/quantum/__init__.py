"""Full Hilbert-space spins, Lindblad channels, Kraus unravelling and the SSE."""

from .channels import (
    BlochParameters,
    LindbladChannel,
    bloch_channels,
    jump_update,
    kraus_lindblad_residual,
    kraus_pair,
    lindblad_apply,
)
from .ensemble import integrate_jump_ensemble, integrate_sse_ensemble
from .master import (
    SteadyState,
    evolve_master,
    lindblad_residual,
    lindblad_superoperator,
    master_steady_state,
)
from .spin import SpinOperatorSet, berezin_symbol, is_hermitian, spin_operators
from .sse import (
    normalize,
    record_increments,
    sse_diffusion,
    sse_drift,
    sse_increment,
    stratonovich_sse_drift,
)
