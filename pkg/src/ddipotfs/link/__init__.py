"""Physical link: DD framing and the doubly dispersive channel."""
