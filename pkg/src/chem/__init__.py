"""Chemistry layer: graph rules, canonical ranking, SMILES, descriptors and SA score."""
