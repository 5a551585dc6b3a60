"""Swarm Chemistry: boids with individual recipes and collision-driven parameter trading."""
