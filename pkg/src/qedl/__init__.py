"""Entity discovery and linking for short open-domain questions.

The package is organised as a pipeline:

* :mod:`qedl.kg` - knowledge graph, lexicon and stopword store
* :mod:`qedl.segmentation` - forward maximum matching and n-gram candidates
* :mod:`qedl.crf` - linear-chain CRF with BIOES labels
* :mod:`qedl.qed` - KG retrieval, CRF, ensemble and lexicon iteration
* :mod:`qedl.similarity` - ranking features (semantic, TF-IDF, LSI, LDA, popularity)
* :mod:`qedl.ranker` - candidate generation and pairwise ranking SVM
* :mod:`qedl.evaluation` - metrics, ablation and training-size sweeps
* :mod:`qedl.fixtures` - deterministic synthetic data
"""

__version__ = "0.1.0"

from qedl.text import normalize

__all__ = ["normalize", "__version__"]
