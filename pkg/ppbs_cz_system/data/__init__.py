"""Result bundles: emitting, reloading and verifying run outputs."""
