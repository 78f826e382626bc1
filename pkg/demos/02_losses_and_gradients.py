"""The compression and distillation losses, and checking their gradients.

Run with ``python3 demos/02_losses_and_gradients.py``.
"""
import numpy as np

from infoclip import LossWeights, compression_loss, distillation_loss, finite_diff_oracle, loss_gradients, total_loss
from infoclip.losses import max_relative_error

rng = np.random.default_rng(1)
n, d = 16, 4
dv, dl, r_teacher = (rng.normal(size=(n, d)) for _ in range(3))
r_student = r_teacher + 0.3 * rng.normal(size=(n, d))

# L_c = S(R) - S(V, L, R): low when R keeps little beyond what V and L already pin down.
lc = compression_loss(dv, dl, r_teacher)
# L_d = -I(R^T; R^S): low when student and teacher alignments share structure.
ld = distillation_loss(r_teacher, r_student)
print(total_loss(task=0.0, lc=lc, ld=ld, w=LossWeights(1.0, 1.0)))

# A student that ignores the teacher loses most of the shared information.
print("L_d with an unrelated student:", distillation_loss(r_teacher, rng.normal(size=(n, d))))

# Analytic gradients against central differences.
w = LossWeights(1.0, 2.0)
grads = loss_gradients(dv, dl, r_teacher, r_student, w)


def objective(rs):
    return w.lambda1 * compression_loss(dv, dl, r_teacher) + w.lambda2 * distillation_loss(r_teacher, rs)


fd = finite_diff_oracle(objective, r_student)
print("max relative error, d/dR^S:", max_relative_error(grads["r_student"], fd))

# The losses only see trace-normalized Grams, so rescaling a batch changes nothing
# and the gradient is orthogonal to the batch itself.
print("<grad, R^S> =", float(np.sum(grads["r_student"] * r_student)))
