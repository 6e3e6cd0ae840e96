"""Sub-sampled Newton methods with non-uniform Hessian sampling and their benchmark harness."""
