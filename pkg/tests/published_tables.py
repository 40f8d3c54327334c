"""Worked examples transcribed from the published tables."""


def _seq(text):
    return [int(tok) for tok in text.split()]


# Case I, class 1, three-state model, posttest 1.5
TABLE_IV = _seq("1 1 1 1")

# Case I, class 1, three-state model, posttest 2.5 (42 levels)
TABLE_V = _seq(
    "1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 2 3 3 3 3 3"
    " 3 3 3 3 3 3 3 3 3 3 3 2 1 1 1 1 1 1 1 1"
)

# Case I, class 2, two-state model, posttest 6.5 (49 levels)
TABLE_VI = _seq(
    "2 2 2 2 1 2 2 2 2 2 2 2 2 2 2 1 2 2 2 2 2 2 2 2 2 2 2 2"
    " 2 2 2 2 2 2 2 2 2 1 2 2 2 2 2 1 2 1 2 2 1"
)

# Case II, class 1, three-state model, posttest 3.88 (48 levels)
TABLE_X = _seq(
    "2 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 2 3 3 3 3 3 3 3 3 3 3"
    " 3 3 3 3 3 3 3 3 3 2 1 1 1 1 1 1 1 1 1 1 1"
)

# Case II, class 2, three-state model, posttest 7.5
TABLE_XI = _seq(
    "2 2 2 3 3 3 3 3 3 3 3 3 3 3 3 1 2 3 3 3 3 3 3 3 1 2 3 3 3 3"
    " 3 3 1 2 3 3 3 3 1 2 2 2 3 3 1 2 3 3 3 1"
)

STUDENT_A = _seq("1 1 2 2 2")
STUDENT_B = _seq("2 2 2 2 2")

# Smoothing coefficients for s_n .. s_{n-4}; the alpha=0.1 third entry is
# printed as "0. 0.081" and read as 0.081.
TABLE_I = {
    0.05: [0.05, 0.0475, 0.0451, 0.0429, 0.0407],
    0.1: [0.1, 0.09, 0.081, 0.0729, 0.06561],
    0.5: [0.5, 0.25, 0.125, 0.0625, 0.03125],
    0.9: [0.9, 0.09, 0.009, 0.0009, 0.00009],
}

# (initial condition, BIC, number of states)
TABLE_II = [(1, 21885, 2), (26, 21720, 3), (35, 21636, 3), (55, 21709, 3), (64, 21779, 4), (100, 21880, 2)]
TABLE_III = [(1, 17716, 2), (26, 17538, 2), (35, 17541, 4), (55, 17557, 3), (64, 17631, 4), (100, 17726, 2)]
TABLE_VIII = [(1, 25895, 2), (26, 25850, 7), (35, 25596, 3), (55, 25613, 3), (64, 25682, 4), (100, 25872, 2)]
TABLE_IX = [(1, 24462, 2), (26, 24206, 3), (35, 24239, 4), (55, 24231, 3), (64, 24315, 4), (100, 24456, 5)]
