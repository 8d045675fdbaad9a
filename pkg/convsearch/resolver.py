"""
Query resolution by term classification.

The model scores every history term of a turn; terms scored at or above the
threshold tau are appended to the current turn query. This module holds the
loss, the training loop with early stopping on dev F1, inference, and the
rule-based "Original" baselines that expand the current turn with whole
earlier turns.

Term-level decisions: a term occurring at several history positions is
selected when any of its positions reaches tau; its reported score is the
maximum over those positions. Terms already in the current turn are never
added.
"""
import copy
import math
import logging
from collections import Counter
from dataclasses import dataclass, replace

import torch

from convsearch.encoder import EncoderConfig, Vocabulary, build_model
from convsearch.error import ConfigurationError, InputError, TrainingError
from convsearch.evaluation import prf
from convsearch.preproc import term_counts, terms_of_texts, text_terms
from convsearch.retrieval import ResolvedQuery
from convsearch.supervision import build_example, distant_resolution_terms, history_texts, reference_texts
from convsearch.trec_io import write_jsonl

logger = logging.getLogger(__name__)

PROBABILITY_EPSILON = 1e-7
DEFAULT_THRESHOLD = 0.5
DEFAULT_LR_GRID = (2e-5, 3e-5, 3e-6)
DEFAULT_DROPOUT_GRID = (0.1, 0.2, 0.3, 0.4)
ORIGINAL_VARIANTS = ("cur", "cur+prev", "cur+first", "all")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 4
    grad_clip_norm: float = 1.0
    patience: int = 2
    threshold: float = DEFAULT_THRESHOLD
    max_epochs: int = 30
    pos_weight: float = 1.0
    seed: int = 13

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}.")
        if self.grad_clip_norm <= 0:
            raise ConfigurationError(f"grad_clip_norm must be > 0, got {self.grad_clip_norm}.")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigurationError(f"threshold must be in (0, 1), got {self.threshold}.")
        if self.patience < 0 or self.max_epochs < 1:
            raise ConfigurationError("patience must be >= 0 and max_epochs >= 1.")
        if self.learning_rate <= 0 or self.pos_weight <= 0:
            raise ConfigurationError("learning_rate and pos_weight must be > 0.")


# --- Batching ---
def collate(model, examples):
    """
    Pads a list of examples into tensors.

    Returns:
        tuple: (ids LongTensor, padding_mask BoolTensor, labels, mask), each
        (batch, max length); labels and mask use the model's float dtype.
    """
    dtype = next(model.parameters()).dtype # float32 or float64, whichever the model was built with.
    length = max(len(example.sequence) for example in examples)
    pad = model.vocabulary.pad_id
    ids = torch.full((len(examples), length), pad, dtype=torch.long)
    padding_mask = torch.ones((len(examples), length), dtype=torch.bool) # True marks padding.
    labels = torch.zeros((len(examples), length), dtype=dtype)
    mask = torch.zeros((len(examples), length), dtype=dtype) # Padding stays masked out.
    for row, example in enumerate(examples):
        n = len(example.sequence)
        ids[row, :n] = torch.tensor(model.vocabulary.encode(example.sequence), dtype=torch.long)
        padding_mask[row, :n] = False
        labels[row, :n] = torch.tensor(example.labels, dtype=dtype)
        mask[row, :n] = torch.tensor(example.mask, dtype=dtype)
    return ids, padding_mask, labels, mask


# --- Model Operations ---
def encode(model, example):
    """Per-position contextual vectors of one example, shape (length, embed_dim)."""
    ids, padding_mask, _, _ = collate(model, [example])
    return model.encode_ids(ids, padding_mask)[0] # Drop the batch axis.


def score_terms(model, example):
    """
    Probabilities at the masked-in positions of one example.

    Runs in eval mode (dropout off) and restores the previous mode.

    Returns:
        dict: Position -> probability in (0, 1); empty when nothing is masked in.
    """
    positions = example.masked_positions()
    if not positions:
        return {}
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            ids, padding_mask, _, _ = collate(model, [example])
            probs = torch.sigmoid(model(ids, padding_mask))[0] # Logits -> probabilities, one row.
    finally:
        model.train(was_training) # Restore the caller's mode.
    return {position: float(probs[position]) for position in positions}


def bce_loss(probs, labels, mask, pos_weight=1.0):
    """
    Mean binary cross-entropy over masked-in positions.

    Probabilities are clamped to [1e-7, 1 - 1e-7]. With `pos_weight` != 1 the
    positive-label term is scaled by it.

    Args:
        probs, labels, mask: Tensors (or sequences) of the same shape.
        pos_weight (float): Weight of positive labels.

    Returns:
        Tensor or None: Scalar loss; None when no position is masked in.
    """
    probs = torch.as_tensor(probs, dtype=torch.float64) if not torch.is_tensor(probs) else probs
    labels = torch.as_tensor(labels, dtype=probs.dtype)
    mask = torch.as_tensor(mask, dtype=probs.dtype)
    count = mask.sum()
    if count.item() == 0:
        return None
    clamped = probs.clamp(PROBABILITY_EPSILON, 1.0 - PROBABILITY_EPSILON) # log(0) guard.
    per_position = -(pos_weight * labels * torch.log(clamped) + (1.0 - labels) * torch.log(1.0 - clamped))
    return (per_position * mask).sum() / count


def predicted_term_scores(model, example):
    """Term -> max probability over its masked-in positions."""
    scores = {}
    for position, probability in score_terms(model, example).items():
        term = example.sequence[position].term
        scores[term] = max(probability, scores.get(term, 0.0)) # Any position may select the term.
    return scores


def select_terms(scores, current_terms, tau):
    return frozenset(term for term, score in scores.items() if score >= tau and term not in current_terms)


def example_f1(model, examples, tau):
    """Mean per-example F1 of thresholded predictions against the example labels."""
    if not examples:
        return 0.0
    values = []
    for example in examples:
        predicted = select_terms(predicted_term_scores(model, example), example.current_terms(), tau)
        values.append(prf(predicted, example.positive_terms())[2]) # F1 only.
    return math.fsum(values) / len(values)


# --- Training ---
def encoder_config_for(base_config, vocabulary):
    """`base_config` with vocab_size set to the vocabulary's size."""
    return replace(base_config, vocab_size=len(vocabulary))


def train(train_set, dev_set, model_config, train_config, init_model=None):
    """
    Trains a resolver with Adam, gradient clipping and early stopping on dev F1.

    Args:
        train_set (list of LabeledExample): Training examples, non-empty.
        dev_set (list of LabeledExample): Gold-labeled dev examples, non-empty.
        model_config (EncoderConfig): Architecture; vocab_size is recomputed
            from the training vocabulary. Ignored with `init_model`.
        train_config (TrainConfig): Optimization settings.
        init_model (ResolverModel, optional): Warm start; its vocabulary and
            architecture are kept and its parameters copied.

    Returns:
        ResolverModel: The parameters with the best dev F1. `model.history`
        holds one {epoch, train_loss, dev_f1} entry per epoch run.

    Raises:
        ConfigurationError: Empty train or dev set.
        TrainingError: Non-finite loss.
    """
    if not train_set:
        raise ConfigurationError("Training set is empty.")
    if not dev_set:
        raise ConfigurationError("Dev set is empty; early stopping needs gold-labeled dev examples.")

    if init_model is not None:
        model = copy.deepcopy(init_model) # Never mutate the caller's model.
        logger.info("Warm-starting from an existing model.", extra={'vocab_size': len(model.vocabulary)})
    else:
        vocabulary = Vocabulary.build(train_set)
        model = build_model(encoder_config_for(model_config, vocabulary), vocabulary)
    validate_examples_fit(list(train_set) + list(dev_set), model.config.max_len)
    torch.manual_seed(train_config.seed) # Dropout stream.

    generator = torch.Generator().manual_seed(train_config.seed) # Shuffling stream, separate from dropout.
    optimizer = torch.optim.Adam(model.parameters(), lr=train_config.learning_rate, eps=1e-8)

    best_f1, best_state, epochs_since_best = -1.0, None, 0
    history = []
    for epoch in range(1, train_config.max_epochs + 1):
        model.train()
        order = torch.randperm(len(train_set), generator=generator).tolist()
        losses = []
        for start in range(0, len(order), train_config.batch_size):
            batch = [train_set[i] for i in order[start:start + train_config.batch_size]]
            ids, padding_mask, labels, mask = collate(model, batch)
            probs = torch.sigmoid(model(ids, padding_mask))
            loss = bce_loss(probs, labels, mask, train_config.pos_weight)
            if loss is None:
                continue # Batch without history terms.
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"Non-finite training loss at epoch {epoch}, batch starting at {start}.",
                    epoch=epoch, batch_start=start, learning_rate=train_config.learning_rate
                )
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), train_config.grad_clip_norm) # Global L2 norm.
            optimizer.step()
            losses.append(loss.item())

        dev_f1 = example_f1(model, dev_set, train_config.threshold)
        train_loss = math.fsum(losses) / len(losses) if losses else 0.0
        history.append({"epoch": epoch, "train_loss": train_loss, "dev_f1": dev_f1})
        logger.info("Finished epoch.", extra={'epoch': epoch, 'train_loss': train_loss, 'dev_f1': dev_f1})

        if dev_f1 > best_f1: # Strict, so the earliest best epoch wins.
            best_f1, epochs_since_best = dev_f1, 0
            best_state = copy.deepcopy(model.state_dict()) # state_dict() returns live references.
        else:
            epochs_since_best += 1
        if epochs_since_best >= train_config.patience:
            break

    model.load_state_dict(best_state)
    model.eval()
    model.history = history
    logger.info("Training finished.", extra={'epochs': len(history), 'best_dev_f1': best_f1})
    return model


def grid_search(train_set, dev_set, model_config, train_config,
                learning_rates=DEFAULT_LR_GRID, dropout_rates=DEFAULT_DROPOUT_GRID):
    """
    Trains one model per (learning rate, dropout) pair and keeps the best by dev F1.

    Ties go to the earlier grid point.

    Returns:
        tuple: (best model, list of {learning_rate, dropout, dev_f1, epochs} rows in grid order).
    """
    best_model, best_f1, table = None, -1.0, []
    for learning_rate in learning_rates:
        for dropout in dropout_rates:
            model = train(
                train_set, dev_set,
                replace(model_config, dropout_rate=dropout),
                replace(train_config, learning_rate=learning_rate),
            )
            dev_f1 = max(entry["dev_f1"] for entry in model.history) # The restored epoch's score.
            table.append({"learning_rate": learning_rate, "dropout": dropout, "dev_f1": dev_f1,
                          "epochs": len(model.history)})
            if dev_f1 > best_f1: # Ties keep the earlier grid point.
                best_model, best_f1 = model, dev_f1
    logger.info("Grid search finished.", extra={'points': len(table), 'best_dev_f1': best_f1})
    return best_model, table


# --- Inference ---
def predict_with_scores(model, topic, turn_index, tau=DEFAULT_THRESHOLD, include_answers=False):
    """
    Terms to add to a turn, plus the score of every history term.

    Returns:
        tuple: (frozenset of Term, dict Term -> probability). Turn 1 yields
        an empty set and no scores.
    """
    example = build_example(topic, turn_index, frozenset(), model.config.max_len, include_answers)
    if example is None:
        return frozenset(), {}
    scores = predicted_term_scores(model, example)
    return select_terms(scores, example.current_terms(), tau), scores


def predict_terms(model, topic, turn_index, tau=DEFAULT_THRESHOLD, include_answers=False):
    """History terms scored >= tau at any position, minus the current turn's terms."""
    return predict_with_scores(model, topic, turn_index, tau, include_answers)[0]


def resolve(current, expansion, query_id=""):
    """
    Appends each expansion term once to the current turn's term bag.

    Args:
        current (str): Raw current turn query.
        expansion (iterable of Term): Terms to append.

    Returns:
        ResolvedQuery: Integer-weighted bag.
    """
    counts = term_counts(current)
    for term in sorted(set(expansion)):
        counts[term] += 1 # Once, however often the term occurs in history.
    return ResolvedQuery.from_counts(counts, query_id)


def _original_turns(variant, turn_index):
    if variant == "cur":
        return [turn_index]
    if variant == "cur+prev":
        return sorted({max(turn_index - 1, 1), turn_index}) # Turn 1 has no previous turn.
    if variant == "cur+first":
        return sorted({1, turn_index})
    if variant == "all":
        return list(range(1, turn_index + 1))
    raise ConfigurationError(f"Unknown Original variant '{variant}'.", variant=variant)


def baseline_original(variant, topic, turn_index):
    """
    Rule-based resolution: the term bag of the current turn together with
    the previous turn, the first turn or every earlier turn.

    Args:
        variant (str): 'cur', 'cur+prev', 'cur+first' or 'all'.
        topic (Topic): The conversation.
        turn_index (int): 1-based current turn.

    Returns:
        ResolvedQuery: Bag over the selected turns' terms.
    """
    counts = Counter()
    for index in _original_turns(variant, turn_index):
        counts.update(term_counts(topic.turn(index).query))
    return ResolvedQuery.from_counts(counts, topic.query_id(turn_index))


def resolution_terms_of(resolved_terms, history, current):
    """
    The resolution terms implied by a resolved query: its terms that come
    from the history and are not in the current turn. Used to score baselines
    intrinsically against gold resolution terms.
    """
    return frozenset((set(resolved_terms) & terms_of_texts(history)) - text_terms(current))


def distant_label_baseline(topic, turn_index, passages, window=50, include_answers=False):
    """Uses the distant-supervision label of a turn itself as the prediction."""
    if turn_index <= 1:
        return frozenset()
    turn = topic.turn(turn_index)
    texts, reason = reference_texts(turn, "distant", passages, window)
    if texts is None:
        logger.debug("No relevance signal for distant baseline.",
                     extra={'query_id': topic.query_id(turn_index), 'reason': reason})
        return frozenset()
    return distant_resolution_terms(texts, history_texts(topic, turn_index, include_answers), turn.query)


def write_predictions(path, predictions):
    """
    Writes predictions as JSON-lines {"topic_id", "turn", "terms", "scores"}.

    Args:
        predictions (iterable): (topic_id, turn, terms, scores) tuples.
    """
    records = (
        {
            "topic_id": topic_id,
            "turn": turn,
            "terms": sorted(terms),
            "scores": {term: scores[term] for term in sorted(scores)},
        }
        for topic_id, turn, terms, scores in predictions
    )
    return write_jsonl(path, records)


def validate_examples_fit(examples, max_len):
    """Raises InputError when an example is longer than the model accepts."""
    for example in examples:
        if len(example.sequence) > max_len:
            raise InputError(
                f"Example {example.query_id} has {len(example.sequence)} positions; model max_len is {max_len}.",
                query_id=example.query_id
            )


def default_encoder_config(config):
    """EncoderConfig from a PipelineConfig (vocab_size is a placeholder until training)."""
    return EncoderConfig(
        vocab_size=len(Vocabulary([])),
        embed_dim=config.embed_dim,
        layers=config.layers,
        heads=config.heads,
        max_len=config.max_len,
        dropout_rate=config.dropout,
        seed=config.seed,
    )


def train_config_from(config):
    """
    TrainConfig from a PipelineConfig.

    tau may be 0 or 1 for inference sweeps, but early stopping needs a
    threshold strictly inside (0, 1); those values fall back to the default
    for dev F1 only.
    """
    threshold = config.tau
    if not 0.0 < threshold < 1.0:
        logger.warning(
            "tau is outside (0, 1); early stopping uses the default threshold instead.",
            extra={'tau': config.tau, 'threshold': DEFAULT_THRESHOLD}
        )
        threshold = DEFAULT_THRESHOLD
    return TrainConfig(
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        grad_clip_norm=config.grad_clip,
        patience=config.patience,
        threshold=threshold,
        max_epochs=config.max_epochs,
        pos_weight=config.pos_weight,
        seed=config.seed,
    )
