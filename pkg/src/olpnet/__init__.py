"""Online pseudoinverse learning for random-projection networks."""

from olpnet.elm import RandomLayer, batch_solve, forward, hidden, layer_init
from olpnet.errors import (
    ArgumentError,
    DataFormatError,
    NumericOverflowError,
    OlpError,
    SingularMatrixError,
)
from olpnet.olp import (
    Mode,
    OlpState,
    load_state,
    olp_gain,
    olp_init,
    olp_normalized_error,
    olp_predict,
    olp_update,
    olp_update_adaptive,
    olp_update_block,
    olp_update_static,
    save_state,
)

__version__ = "0.1.0"
