"""SMILES RNN Generator - character-level LSTM molecule generation and evaluation."""
