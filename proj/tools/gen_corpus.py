#!/usr/bin/env python3
"""Generates the bundled text corpora under data/.

captions.txt is short descriptive captions (the in-domain set); qa_ood.txt is
question/answer dialogue written in a different register (the out-of-domain
set). Output is fixed by the seed, and the files are committed, so rerunning
this script is only needed when the grammar changes.
"""
import argparse
import random

SUBJECTS = [
    "man", "woman", "child", "dog", "cat", "horse", "bird", "boy", "girl",
    "group of people", "skier", "surfer", "cow", "giraffe", "elephant",
    "bear", "zebra", "sheep", "person", "chef", "player",
]
ADJ = [
    "young", "small", "large", "old", "brown", "white", "black", "happy",
    "tall", "little", "red", "spotted", "striped", "wet",
]
ACTIONS = [
    "riding a bike", "sitting on a bench", "standing in a field",
    "walking down a street", "holding an umbrella", "eating a sandwich",
    "playing with a frisbee", "laying on a bed", "looking at the camera",
    "riding a wave", "flying a kite", "crossing the road",
    "grazing on grass", "drinking water", "jumping over a fence",
    "standing next to a fence", "playing tennis", "throwing a ball",
    "cutting a cake", "reading a book",
]
PLACES = [
    "in a park", "on a beach", "near the water", "in the snow",
    "on a city street", "in a kitchen", "at the zoo", "in a grassy field",
    "next to a building", "under a tree", "on a dirt road",
    "in front of a house", "by the lake", "on a tennis court",
]
OBJECTS = [
    "a plate of food", "a red bus", "a stop sign", "a laptop computer",
    "a bowl of fruit", "a pizza", "a clock tower", "a train",
    "a pair of scissors", "a vase of flowers", "a teddy bear",
    "a parked car", "a fire hydrant", "a boat",
]
OBJ_PLACES = [
    "on a table", "on the street", "at the station", "on a desk",
    "on the counter", "in the water", "on the sidewalk", "in a room",
]

QUESTIONS = [
    ("what color is the {o}?", "the {o} is {c}."),
    ("how many {p} are there?", "there are {n} {p} in the picture."),
    ("is it raining outside?", "no, it looks sunny and dry."),
    ("what is the weather like?", "it seems {w} today."),
    ("where is the {o}?", "the {o} is {l}."),
    ("can you see any {p}?", "yes, i can see {n} {p}."),
    ("what time of day is it?", "it looks like {t}."),
    ("who is holding the {o}?", "nobody is holding the {o}."),
]
COLORS = ["green", "yellow", "blue", "orange", "purple", "gray", "pink"]
PLURALS = ["people", "trees", "cars", "birds", "windows", "chairs", "boats"]
NUMBERS = ["two", "three", "four", "five", "several", "many"]
WEATHER = ["cloudy", "bright", "foggy", "windy", "warm", "cold"]
TIMES = ["early morning", "late afternoon", "evening", "noon", "night"]
OOD_OBJ = ["umbrella", "kite", "bicycle", "truck", "lamp", "bag", "hat"]
OOD_LOC = ["on the left", "behind the car", "near the door",
           "in the corner", "on the shelf", "under the table"]


def article(word):
    return "an" if word[0] in "aeiou" else "a"


def caption(rng):
    kind = rng.random()
    if kind < 0.55:
        noun = rng.choice(SUBJECTS)
        if rng.random() < 0.5:
            adj = rng.choice(ADJ)
            head = f"{article(adj)} {adj} {noun}"
        else:
            head = f"{article(noun)} {noun}"
        return f"{head} {rng.choice(ACTIONS)} {rng.choice(PLACES)}."
    if kind < 0.8:
        return f"{rng.choice(OBJECTS)} {rng.choice(OBJ_PLACES)}."
    noun = rng.choice(SUBJECTS)
    return (f"there is {article(noun)} {noun} {rng.choice(ACTIONS)} "
            f"{rng.choice(PLACES)}.")


def qa(rng):
    q, a = rng.choice(QUESTIONS)
    fill = dict(o=rng.choice(OOD_OBJ), c=rng.choice(COLORS),
                p=rng.choice(PLURALS), n=rng.choice(NUMBERS),
                w=rng.choice(WEATHER), l=rng.choice(OOD_LOC),
                t=rng.choice(TIMES))
    return f"q: {q.format(**fill)} a: {a.format(**fill)}"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--captions", type=int, default=1400)
    ap.add_argument("--qa", type=int, default=500)
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    with open(f"{args.out}/captions.txt", "w", encoding="utf-8") as f:
        for _ in range(args.captions):
            f.write(caption(rng) + "\n")
    with open(f"{args.out}/qa_ood.txt", "w", encoding="utf-8") as f:
        for _ in range(args.qa):
            f.write(qa(rng) + "\n")


if __name__ == "__main__":
    main()
