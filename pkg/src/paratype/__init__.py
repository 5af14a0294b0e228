"""paratype: latent paragraph-type modeling for news articles plus
template-based generation of crime-story lede paragraphs."""

__version__ = "0.1.0"
