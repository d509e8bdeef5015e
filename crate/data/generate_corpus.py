"""Regenerate data/synthetic_reviews.csv.

Usage: python3 data/generate_corpus.py [--seed N] [--output PATH]
"""

import argparse
import csv
import random

POSITIVE = ["delicious", "tasty", "friendly", "excellent", "fresh",
            "amazing", "wonderful", "great", "perfect", "lovely"]
NEGATIVE = ["bland", "cold", "slow", "awful", "terrible",
            "greasy", "stale", "rude", "horrible", "dirty"]
SUBJECTS = ["food", "pizza", "pasta", "service", "staff", "soup",
            "coffee", "burger", "dessert", "waiter"]
INTENSIFIERS = ["", "very ", "really ", "so "]
FILLER_SLOTS = [
    ["we", "i", "my friend", "my family"],
    ["went there", "came in", "stopped by", "sat down"],
    ["on friday", "for lunch", "after work", "at night", "with friends", "near the station"],
]


def sentiment_sentence(rng, words):
    subject = rng.choice(SUBJECTS)
    return f"The {subject} was {rng.choice(INTENSIFIERS)}{rng.choice(words)}."


def filler_sentence(rng):
    words = [rng.choice(slot) for slot in FILLER_SLOTS]
    return " ".join(words).capitalize() + "."


def document(rng, label, long):
    own, other = (POSITIVE, NEGATIVE) if label == 1 else (NEGATIVE, POSITIVE)
    n_own = rng.randint(1, 2)
    sentences = [sentiment_sentence(rng, own) for _ in range(n_own)]
    if n_own == 2:
        sentences.append(sentiment_sentence(rng, other))
    n_filler = rng.randint(5, 8) if long else rng.randint(0, 1)
    sentences += [filler_sentence(rng) for _ in range(n_filler)]
    rng.shuffle(sentences)
    return " ".join(sentences)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=20221)
    parser.add_argument("--output", default="data/synthetic_reviews.csv")
    args = parser.parse_args()
    rng = random.Random(args.seed)
    rows = []
    for i in range(60):
        rows.append((document(rng, i % 2, long=i >= 40), i % 2))
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", "label"])
        writer.writerows(rows)


if __name__ == "__main__":
    main()
