"""Scene-text recognition with attentional multi-font glyph generation.

A 2D-attention encoder/decoder predicts character sequences from word
images while a conditional glyph generator, driven by the same attention
glimpses and a table of trainable font-style embeddings, reconstructs each
character as a 32x32 glyph in randomly sampled target fonts. Training the
two branches jointly pushes font style out of the recognition features.
"""

__version__ = "0.1.0"
