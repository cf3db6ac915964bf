"""Design-matrix construction and the lasso solver."""
