"""Records, manifests, embedding stores, and the synthetic corpus."""
