"""∞P-Set CRDT, baseline sets and the tools that check them."""
