__all__ = [
    "config",
    "utils",
    "contours",
    "pfaffian",
    "kernels",
    "exp_kernel",
    "cross_kernel",
    "distributions",
    "particles",
    "lpp",
    "hydro",
    "harness",
    "cli",
]
