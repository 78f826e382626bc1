"""Entropy and mutual information straight from Gram matrices.

Run with ``python3 demos/01_entropy_and_mi.py``.
"""
import numpy as np

from infoclip import EntropySpec, gram_from_features, joint_entropy, mutual_information, renyi_entropy

rng = np.random.default_rng(0)

# Four orthonormal samples: the Gram is I/4 and the entropy is log2 4.
print("orthonormal  S2 =", renyi_entropy(gram_from_features(np.eye(4))))

# Identical samples carry no information.
same = np.tile(rng.normal(size=(1, 5)), (6, 1))
print("identical    S2 =", renyi_entropy(gram_from_features(same)))

# The alpha=2 shortcut -log2 ||G||_F^2 agrees with the eigenvalue route.
x = rng.normal(size=(40, 6))
g = gram_from_features(x)
fast = renyi_entropy(g)
slow = renyi_entropy(g, EntropySpec(2.0, "eigen"))
print(f"random batch S2 = {fast:.12f} (frobenius) vs {slow:.12f} (eigen)")

# Other orders need the spectrum. alpha near 1 approximates Shannon entropy.
for alpha in (0.5, 1.01, 3.0):
    print(f"  alpha={alpha:<5} S = {renyi_entropy(g, EntropySpec(alpha, 'eigen')):.6f}")

# Joint entropy is the entropy of the normalized Hadamard product.
y = x @ rng.normal(size=(6, 3)) + 0.1 * rng.normal(size=(40, 3))
z = rng.normal(size=(40, 3))
gy, gz = gram_from_features(y), gram_from_features(z)
print("S(x, y)      =", joint_entropy([g, gy]))

# A noisy linear function of x shares more information with x than unrelated noise does.
print("I(x; y)      =", mutual_information(g, gy))
print("I(x; z)      =", mutual_information(g, gz))
