"""
Default pipeline settings definition.

This module defines the `DEFAULT_SETTINGS` dictionary, which serves as the
schema and source of default values for every setting the pipeline reads
from a configuration file, the environment, or the command line.

Each key is the setting's identifier as written in a `key=value` config file.
The value for each key is another dictionary containing:
    - 'default': The default value, already in its final Python type
                 (None for paths that have no sensible default).
    - 'label' (str): A human-readable label, used in report headers.
    - 'type' (str): How raw string values are coerced: 'path', 'int',
                    'float', 'str', 'choice' or 'bool'.
    - 'description' (str): What the setting controls.
    - 'min' / 'max' (optional): Inclusive numeric bounds.
    - 'exclusive_min' / 'exclusive_max' (optional): Exclusive numeric bounds.
    - 'options' (optional): Allowed values for 'choice' settings.

`DEFAULT_SETTINGS` is used by `convsearch.config.load_config` to coerce and
range-check values, and by report headers to describe a run.
"""

RESOLVER_VARIANTS = [
    'quretec',
    'original:cur',
    'original:cur+prev',
    'original:cur+first',
    'original:all',
    'rm3:cur',
    'rm3:cur+prev',
    'rm3:cur+first',
    'rm3:all',
    'oracle',
    'distant',
]

DEFAULT_SETTINGS = {
    # --- Input and Output Paths ---
    'corpus': {
        'default': None,
        'label': 'Passage Corpus (TSV)',
        'type': 'path',
        'description': 'TSV file with passage_id<TAB>text lines.'
    },
    'topics': {
        'default': None,
        'label': 'Topics (JSON-lines)',
        'type': 'path',
        'description': 'One conversation topic per line with its turns.'
    },
    'qrels': {
        'default': None,
        'label': 'Relevance Judgments',
        'type': 'path',
        'description': 'TREC qrels: "query_id 0 passage_id grade" lines.'
    },
    'index_dir': {
        'default': None,
        'label': 'Index Directory',
        'type': 'path',
        'description': 'Directory holding the persisted inverted index.'
    },
    'model': {
        'default': None,
        'label': 'Resolver Checkpoint',
        'type': 'path',
        'description': 'JSON checkpoint of a trained term-classification model.'
    },
    'output_dir': {
        'default': 'output',
        'label': 'Output Directory',
        'type': 'path',
        'description': 'Where the pipeline command writes runs and reports.'
    },

    # --- Retrieval and Fusion ---
    'mu': {
        'default': 2500.0,
        'label': 'Dirichlet Smoothing Mass',
        'type': 'float',
        'exclusive_min': 0.0,
        'description': 'Dirichlet prior mu for query-likelihood scoring.'
    },
    'depth': {
        'default': 1000,
        'label': 'Retrieval Depth',
        'type': 'int',
        'min': 1,
        'description': 'Number of passages kept in each initial ranked list.'
    },
    'k_rrf': {
        'default': 60.0,
        'label': 'RRF Constant',
        'type': 'float',
        'exclusive_min': 0.0,
        'description': 'k in the reciprocal rank fusion score 1/(k + rank).'
    },
    'rm3_n': {
        'default': 10,
        'label': 'RM3 Feedback Passages',
        'type': 'int',
        'min': 1,
        'description': 'Number of top-ranked passages treated as relevant by RM3.'
    },
    'rm3_k': {
        'default': 10,
        'label': 'RM3 Expansion Terms',
        'type': 'int',
        'min': 1,
        'description': 'Number of expansion terms RM3 keeps.'
    },
    'rm3_lambda': {
        'default': 0.8,
        'label': 'RM3 Original Query Weight',
        'type': 'float',
        'min': 0.0,
        'max': 1.0,
        'description': 'Interpolation weight of the original query in RM3.'
    },

    'scorer': {
        'default': 'overlap',
        'label': 'Reranking Scorer',
        'type': 'choice',
        'options': ['overlap', 'ql'],
        'description': 'Second-stage scorer: length-normalized term overlap or query likelihood.'
    },

    # --- Evaluation ---
    'ndcg_cut': {
        'default': 3,
        'label': 'NDCG Cutoff',
        'type': 'int',
        'min': 1,
        'description': 'Rank cutoff for NDCG.'
    },
    'binarize_at': {
        'default': 1,
        'label': 'Relevance Threshold',
        'type': 'int',
        'min': 1,
        'description': 'Minimum grade counted as relevant for Recall, MAP and MRR.'
    },

    # --- Query Resolution ---
    'variant': {
        'default': 'quretec',
        'label': 'Resolver Variant',
        'type': 'choice',
        'options': RESOLVER_VARIANTS,
        'description': 'How the current turn query is resolved before retrieval.'
    },
    'variants': {
        'default': 'oracle,original:cur',
        'label': 'Pipeline Variants',
        'type': 'str',
        'description': 'Comma-separated resolver variants run by the pipeline command; the first is the comparison baseline.'
    },
    'tau': {
        'default': 0.5,
        'label': 'Classification Threshold',
        'type': 'float',
        'min': 0.0,
        'exclusive_max': 1.0,
        'description': 'History terms scored at or above tau are added to the query.'
    },
    'label_mode': {
        'default': 'gold',
        'label': 'Supervision Mode',
        'type': 'choice',
        'options': ['gold', 'distant'],
        'description': 'Derive labels from gold rewrites or from relevant passages.'
    },
    'window': {
        'default': 50,
        'label': 'Answer Window (chars)',
        'type': 'int',
        'min': 0,
        'description': 'Characters kept on each side of an answer span for distant labels.'
    },
    'history_answers': {
        'default': False,
        'label': 'Include Answers in History',
        'type': 'bool',
        'description': 'Append previous turns\' answer spans to the conversation history.'
    },
    'max_len': {
        'default': 256,
        'label': 'Maximum Sequence Length',
        'type': 'int',
        'min': 3,
        'description': 'Positions per example; oldest history tokens are dropped first.'
    },

    # --- Encoder and Training ---
    'embed_dim': {
        'default': 128,
        'label': 'Embedding Dimension',
        'type': 'int',
        'min': 1,
        'description': 'Width of token vectors; must be divisible by heads.'
    },
    'layers': {
        'default': 2,
        'label': 'Encoder Layers',
        'type': 'int',
        'min': 1,
        'description': 'Number of bidirectional self-attention blocks.'
    },
    'heads': {
        'default': 4,
        'label': 'Attention Heads',
        'type': 'int',
        'min': 1,
        'description': 'Attention heads per block.'
    },
    'dropout': {
        'default': 0.1,
        'label': 'Dropout Rate',
        'type': 'float',
        'min': 0.0,
        'exclusive_max': 1.0,
        'description': 'Dropout in the encoder and before the classification layer.'
    },
    'learning_rate': {
        'default': 1e-3,
        'label': 'Learning Rate',
        'type': 'float',
        'exclusive_min': 0.0,
        'description': 'Adam learning rate.'
    },
    'batch_size': {
        'default': 4,
        'label': 'Batch Size',
        'type': 'int',
        'min': 1,
        'description': 'Examples per optimizer step.'
    },
    'grad_clip': {
        'default': 1.0,
        'label': 'Gradient Clipping Norm',
        'type': 'float',
        'exclusive_min': 0.0,
        'description': 'Maximum global gradient norm.'
    },
    'patience': {
        'default': 2,
        'label': 'Early Stopping Patience',
        'type': 'int',
        'min': 0,
        'description': 'Epochs without dev F1 improvement before training stops.'
    },
    'max_epochs': {
        'default': 30,
        'label': 'Maximum Epochs',
        'type': 'int',
        'min': 1,
        'description': 'Hard cap on training epochs.'
    },
    'pos_weight': {
        'default': 1.0,
        'label': 'Positive Class Weight',
        'type': 'float',
        'exclusive_min': 0.0,
        'description': 'Weight of positive labels in the cross-entropy loss (1.0 = unweighted).'
    },
    'seed': {
        'default': 13,
        'label': 'Random Seed',
        'type': 'int',
        'min': 0,
        'description': 'Seed for model initialization, shuffling and subsampling.'
    },

    # --- Runtime ---
    'workers': {
        'default': 1,
        'label': 'Worker Threads',
        'type': 'int',
        'min': 1,
        'description': 'Threads used for per-query search; output order never depends on it.'
    },
    'log_level': {
        'default': 'INFO',
        'label': 'Log Level',
        'type': 'choice',
        'options': ['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        'description': 'Minimum level of emitted log records.'
    },
}
