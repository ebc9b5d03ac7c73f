# Galerkin package
