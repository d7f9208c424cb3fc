#!/usr/bin/env python3
"""Regenerate the sample fixtures under fixtures/.

Deterministic: fixed seed, sorted ids, stable JSON key order. The content is
synthetic; only the p1 scholar record is a fixed anchor used across tests
and documentation.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"

rng = random.Random(20240917)

FIRST = [
    "Alice", "Bola", "Chen", "Dmitri", "Elena", "Farid", "Grace", "Hiro",
    "Ingrid", "Jamal", "Kavya", "Liam", "Mei", "Noor", "Omar", "Priya",
    "Quentin", "Rosa", "Sven", "Tara", "Umar", "Vera", "Wei", "Ximena",
    "Yusuf", "Zoe", "Anders", "Bianca", "Carlos", "Daria",
]
LAST = [
    "Zhang", "Okafor", "Ivanov", "Garcia", "Kumar", "Tanaka", "Muller",
    "Santos", "Novak", "Haddad", "Lindqvist", "Moreau", "Rossi", "Petrov",
    "Nguyen", "Kim", "Adeyemi", "Fischer", "Costa", "Yamada",
]
ORGS = [
    "Lakeside Institute of Technology", "Northgate University",
    "Coastal Research Institute", "Redwood Polytechnic",
    "Harbor City University", "Summit College", "Meridian University",
    "Blue Valley Institute", "Stonebridge University", "Aurora Technical University",
]
TOPICS = [
    "Machine Learning", "Computer Vision", "Natural Language Processing",
    "Robotics", "Databases", "Distributed Systems", "Graph Mining",
    "Information Retrieval", "Speech Recognition", "Optimization",
    "Knowledge Graphs", "Reinforcement Learning", "Program Synthesis",
    "Human Computer Interaction", "Computational Biology", "Data Privacy",
]
POSITIONS = ["Professor", "Associate Professor", "Assistant Professor",
             "Research Scientist", "Lecturer", "Postdoctoral Researcher"]
GENDERS = ["female", "male", "unspecified"]

TITLE_SHAPES = [
    "Towards {a} for {b}",
    "A Survey of {a} in {b}",
    "Scalable {a} with {b}",
    "Rethinking {a} under {b}",
    "Benchmarking {a} against {b}",
    "{a}: Lessons from {b}",
    "Efficient {a} beyond {b}",
]
NOUNS_A = [
    "Sparse Retrieval", "Neural Ranking", "Entity Linking", "Query Planning",
    "Graph Embeddings", "Index Compression", "Dialogue Policies",
    "Curriculum Sampling", "Attention Pruning", "Feature Hashing",
    "Schema Matching", "Answer Calibration", "Prompt Routing", "Tool Selection",
]
NOUNS_B = [
    "Noisy Supervision", "Long Documents", "Streaming Workloads",
    "Low Resource Settings", "Heterogeneous Graphs", "Sparse Rewards",
    "Web Scale Corpora", "Multilingual Data", "Cold Start Conditions",
    "Adversarial Inputs",
]

ABSTRACT_SHAPES = [
    "We study {t} and report consistent gains on synthetic benchmarks.",
    "This paper revisits {t} and proposes a simple baseline that is hard to beat.",
    "We analyze failure modes of {t} and derive practical guidelines.",
    "A systematic evaluation of {t} across ten settings is presented.",
]


def scholar_records():
    records = []
    # the fixed anchor scholar
    records.append({
        "id": "p1",
        "kind": "scholar",
        "attributes": {
            "name": "Yann Lecun",
            "organization": "New York University",
            "interest": ["AI", "Machine Learning", "Computer Vision",
                         "Robotics", "Image Compression"],
            "email": "yl22@nyu.edu",
            "gender": "male",
            "position": "Professor",
            "bio": "Works on learning systems and energy based models.",
            "education": "PhD, Universite Pierre et Marie Curie",
            "citation_count": 180000,
            "publication_count": 350,
        },
        "relations": {},
    })
    names = set()
    i = 2
    while i <= 60:
        name = f"{rng.choice(FIRST)} {rng.choice(LAST)}"
        if name in names:
            continue
        names.add(name)
        org = rng.choice(ORGS)
        interests = rng.sample(TOPICS, rng.randint(2, 5))
        attrs = {
            "name": name,
            "organization": org,
            "interest": interests,
            "email": f"{name.split()[0].lower()}.{name.split()[1].lower()}@example.edu",
            "citation_count": rng.randint(10, 60000),
            "publication_count": rng.randint(1, 400),
        }
        if rng.random() < 0.8:
            attrs["position"] = rng.choice(POSITIONS)
        if rng.random() < 0.7:
            attrs["gender"] = rng.choice(GENDERS)
        if rng.random() < 0.6:
            attrs["bio"] = f"Researches {interests[0].lower()} and {interests[-1].lower()}."
        if rng.random() < 0.6:
            attrs["education"] = f"PhD, {rng.choice(ORGS)}"
        records.append({
            "id": f"p{i}",
            "kind": "scholar",
            "attributes": attrs,
            "relations": {},
        })
        i += 1
    return records


def publication_records(scholar_ids):
    records = []
    titles = set()
    i = 1
    while i <= 110:
        title = rng.choice(TITLE_SHAPES).format(a=rng.choice(NOUNS_A), b=rng.choice(NOUNS_B))
        if title in titles:
            continue
        titles.add(title)
        authors = rng.sample(scholar_ids, rng.randint(1, 4))
        topic = rng.choice(TOPICS).lower()
        records.append({
            "id": f"w{i}",
            "kind": "publication",
            "attributes": {
                "title": title,
                "year": rng.randint(1995, 2023),
                "abstract": rng.choice(ABSTRACT_SHAPES).format(t=topic),
                "citation_count": rng.randint(0, 5000),
            },
            "relations": {"authors": authors},
        })
        i += 1
    # guarantee the anchor scholar has coauthors through a fixed paper
    records.append({
        "id": "w111",
        "kind": "publication",
        "attributes": {
            "title": "Energy Based Learning for Document Retrieval",
            "year": 2006,
            "abstract": "We connect energy based models with retrieval scoring.",
            "citation_count": 2400,
        },
        "relations": {"authors": ["p1", "p2", "p3"]},
    })
    return records


SECTION_SHAPES = [
    "The {t} approach was described early on. Later work refined the {t} idea. "
    "Many systems now ship a {t} component.",
    "Researchers measured {t} on public data. Results varied across domains. "
    "The community still debates {t} trade offs.",
    "Early adopters documented {t} pitfalls. A common fix is careful tuning. "
    "Textbooks cover {t} in introductory chapters.",
]

ARTICLE_TOPICS = [
    "Photosynthesis", "Plate Tectonics", "Roman Aqueducts", "Monsoon Season",
    "Polar Bears", "Solar Eclipses", "Danube River", "Honey Bees",
    "Printing Press", "Silk Road", "Coral Reefs", "Northern Lights",
    "Steam Engines", "Bicycle Gearing", "Cheese Making", "Glass Blowing",
    "Origami", "Marathon Running", "Chess Openings", "Jazz Improvisation",
    "Sourdough Bread", "Tea Ceremonies", "Lighthouses", "Windmills",
    "Volcanic Ash", "River Deltas", "Mountain Glaciers", "Desert Oases",
    "Rainforest Canopy", "Tidal Pools", "Meteor Showers", "Limestone Caves",
    "Paper Recycling", "Urban Gardens", "Subway Systems", "Suspension Bridges",
    "Clock Towers", "Castle Moats", "Stained Glass", "Herbal Medicine",
    "Falconry", "Beekeeping", "Pottery Wheels", "Weaving Looms",
    "Star Charts", "Compass Navigation", "Sign Language", "Morse Code",
    "Ice Harvesting", "Salt Mining", "Amber Fossils", "Butterfly Migration",
]


def article_records():
    records = []
    # anchors used throughout tests and docs
    records.append({
        "id": "a1",
        "kind": "article",
        "attributes": {
            "title": "Gradient Descent",
            "abstract": "Gradient descent is an iterative optimization method that follows the negative slope of a function.",
        },
        "relations": {},
        "sections": [
            {"heading": "Method",
             "body": "The gradient points toward steeper values. Each step moves against the gradient. Convergence depends on the step size."},
            {"heading": "Applications",
             "body": "Model training typically relies on the gradient. Momentum variants smooth the updates. Line search can replace fixed steps."},
        ],
    })
    records.append({
        "id": "a2",
        "kind": "article",
        "attributes": {
            "title": "Paris",
            "abstract": "Paris is the capital of France and its most populous city.",
        },
        "relations": {},
        "sections": [
            {"heading": "Geography",
             "body": "The city sits on the Seine. Twenty arrondissements spiral outward. Elevation varies little across the basin."},
            {"heading": "Landmarks",
             "body": "The Eiffel Tower opened in 1889. The Louvre holds a vast collection. Notre Dame anchors an island in the Seine."},
        ],
    })
    for i, topic in enumerate(ARTICLE_TOPICS, start=3):
        t = topic.lower()
        sections = []
        for heading in rng.sample(["History", "Overview", "Technique", "Impact", "Regions"], rng.randint(2, 3)):
            sections.append({
                "heading": heading,
                "body": rng.choice(SECTION_SHAPES).format(t=t),
            })
        records.append({
            "id": f"a{i}",
            "kind": "article",
            "attributes": {
                "title": topic,
                "abstract": f"{topic} concerns {t} and appears in many reference works.",
            },
            "relations": {},
            "sections": sections,
        })
    return records


def dump(path, records):
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(", ", ": ")) + "\n")
    print(f"{path}: {len(records)} records")


def main():
    OUT.mkdir(exist_ok=True)
    scholars = scholar_records()
    publications = publication_records([s["id"] for s in scholars])
    dump(OUT / "mini-aminer.jsonl", scholars + publications)
    dump(OUT / "mini-wiki.jsonl", article_records())


if __name__ == "__main__":
    main()
