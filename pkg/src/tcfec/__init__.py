"""Short-block forward error correction workbench."""
