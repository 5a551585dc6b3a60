"""Jordan-algebra artificial chemistry over 3x3 complex Hermitian matrices."""
