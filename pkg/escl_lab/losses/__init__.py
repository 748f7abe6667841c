from .base import (
    EquivariantLoss, LossBreakdown, LossConfig, escl_loss, view_distances,
)
from .infonce import info_nce, info_nce_alt, info_nce_grad
from .equivariant import (
    CosSimLoss, NoEquivariantLoss, RDLoss, cossim_loss, cossim_loss_grad,
    rd_loss, rd_loss_grad,
)
