"""Static graph MetaChem runtime with three reference chemistries."""
