# Solver, walk and simulation services for Maker-Breaker games on Galton-Watson trees
