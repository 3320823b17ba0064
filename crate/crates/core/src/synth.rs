//! Synthetic two-style template corpus.
//!
//! Sentences are restaurant-review templates with shared content slots and one
//! or two sentiment adjectives. Adjectives come in antonym pairs, which gives
//! the test split exact parallel references.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{corpus_path, Split, Style, StyleNames};
use crate::error::{Error, Result};
use crate::rng::stream;

pub const POSITIVE: [&str; 14] = [
    "great",
    "delicious",
    "amazing",
    "friendly",
    "excellent",
    "fresh",
    "wonderful",
    "tasty",
    "perfect",
    "fantastic",
    "lovely",
    "awesome",
    "superb",
    "pleasant",
];
pub const NEGATIVE: [&str; 14] = [
    "terrible",
    "bland",
    "awful",
    "rude",
    "horrible",
    "stale",
    "disappointing",
    "gross",
    "mediocre",
    "disgusting",
    "nasty",
    "lousy",
    "poor",
    "unpleasant",
];

const DISHES: [&str; 79] = [
    "pizza",
    "burger",
    "soup",
    "salad",
    "pasta",
    "steak",
    "chicken",
    "fries",
    "sandwich",
    "coffee",
    "bread",
    "sushi",
    "tacos",
    "noodles",
    "rice",
    "fish",
    "dessert",
    "cake",
    "wings",
    "curry",
    "omelette",
    "pancakes",
    "dumplings",
    "ramen",
    "lasagna",
    "risotto",
    "burrito",
    "nachos",
    "brisket",
    "ribs",
    "salmon",
    "shrimp",
    "lobster",
    "oysters",
    "scallops",
    "tofu",
    "falafel",
    "hummus",
    "kebab",
    "gyro",
    "pho",
    "bagel",
    "croissant",
    "muffin",
    "waffles",
    "crepes",
    "donut",
    "cookie",
    "brownie",
    "pie",
    "cheesecake",
    "gelato",
    "tea",
    "latte",
    "smoothie",
    "lemonade",
    "milkshake",
    "chili",
    "stew",
    "meatballs",
    "quesadilla",
    "enchiladas",
    "tamales",
    "paella",
    "gnocchi",
    "ravioli",
    "calzone",
    "pretzel",
    "cornbread",
    "biscuits",
    "porkchop",
    "meatloaf",
    "hotdog",
    "sausage",
    "bacon",
    "eggs",
    "granola",
    "yogurt",
    "oatmeal",
];
const PLACES: [&str; 20] = [
    "restaurant",
    "diner",
    "cafe",
    "bistro",
    "bar",
    "spot",
    "bakery",
    "grill",
    "pub",
    "tavern",
    "eatery",
    "pizzeria",
    "steakhouse",
    "brewery",
    "deli",
    "buffet",
    "canteen",
    "trattoria",
    "cantina",
    "joint",
];
const PEOPLE: [&str; 16] = [
    "friend",
    "wife",
    "husband",
    "sister",
    "brother",
    "mom",
    "dad",
    "boss",
    "cousin",
    "aunt",
    "uncle",
    "neighbor",
    "roommate",
    "girlfriend",
    "boyfriend",
    "coworker",
];
const TIMES: [&str; 12] = [
    "night", "week", "weekend", "friday", "sunday", "month", "saturday", "monday", "tuesday",
    "summer", "winter", "spring",
];
const STAFF: [&str; 8] = [
    "waiter",
    "server",
    "cashier",
    "manager",
    "bartender",
    "hostess",
    "chef",
    "owner",
];

/// `{D}` dish, `{D2}` second dish, `{P}` place, `{R}` person, `{T}` time,
/// `{S}` staff, `{A}` and `{A2}` style adjectives.
const TEMPLATES: [&str; 12] = [
    "the {D} at this {P} was {A} .",
    "we ordered the {D} and it was {A} .",
    "my {R} said the {D} was really {A} .",
    "last {T} we tried the {D} and it tasted {A} .",
    "the {S} brought our {D} and it was {A} .",
    "overall the {D} at the {P} was {A} for the price .",
    "i came here with my {R} and the {D} was {A} .",
    "the {D} was {A} and the {D2} was {A2} .",
    "our {S} was {A} and the {D} came out quickly .",
    "i would say this {P} is {A} for a {T} dinner .",
    "the {D} here is {A} , just like last {T} .",
    "honestly the {D} and the {D2} were both {A} .",
];

#[derive(Clone, Debug)]
pub struct ToySpec {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            train: 2000,
            dev: 200,
            test: 200,
            seed: 17,
        }
    }
}

/// Lines per split and style; `refs[style][k][line]` align with `test[style]`.
#[derive(Clone, Debug)]
pub struct ToyCorpus {
    pub names: StyleNames,
    pub train: [Vec<String>; 2],
    pub dev: [Vec<String>; 2],
    pub test: [Vec<String>; 2],
    pub refs: [Vec<Vec<String>>; 2],
}

pub fn style_words(style: Style) -> &'static [&'static str] {
    match style {
        Style::X => &POSITIVE,
        Style::Y => &NEGATIVE,
    }
}

/// Antonym of a style adjective, if it is one.
pub fn antonym(word: &str) -> Option<&'static str> {
    POSITIVE
        .iter()
        .position(|w| *w == word)
        .map(|i| NEGATIVE[i])
        .or_else(|| {
            NEGATIVE
                .iter()
                .position(|w| *w == word)
                .map(|i| POSITIVE[i])
        })
}

struct Sentence {
    tokens: Vec<String>,
    /// Positions of style adjectives and their pair index.
    slots: Vec<(usize, usize)>,
}

fn sample<R: Rng>(rng: &mut R, style: Style) -> Sentence {
    let template = TEMPLATES.choose(rng).unwrap();
    let words = style_words(style);
    let d1 = *DISHES.choose(rng).unwrap();
    let d2 = loop {
        let d = *DISHES.choose(rng).unwrap();
        if d != d1 {
            break d;
        }
    };
    let mut tokens = Vec::new();
    let mut slots = Vec::new();
    for tok in template.split_whitespace() {
        let w = match tok {
            "{D}" => d1,
            "{D2}" => d2,
            "{P}" => PLACES.choose(rng).unwrap(),
            "{R}" => PEOPLE.choose(rng).unwrap(),
            "{T}" => TIMES.choose(rng).unwrap(),
            "{S}" => STAFF.choose(rng).unwrap(),
            "{A}" | "{A2}" => {
                let k = rng.gen_range(0..words.len());
                slots.push((tokens.len(), k));
                words[k]
            }
            other => other,
        };
        tokens.push(w.to_string());
    }
    Sentence { tokens, slots }
}

fn lines<R: Rng>(rng: &mut R, style: Style, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| sample(rng, style).tokens.join(" "))
        .collect()
}

pub fn generate(spec: &ToySpec) -> ToyCorpus {
    let mut out = ToyCorpus {
        names: StyleNames::new("pos", "neg"),
        train: [Vec::new(), Vec::new()],
        dev: [Vec::new(), Vec::new()],
        test: [Vec::new(), Vec::new()],
        refs: [Vec::new(), Vec::new()],
    };
    for style in Style::BOTH {
        let s = style.index() as u64;
        out.train[style.index()] = lines(&mut stream(spec.seed, &[0, s]), style, spec.train);
        out.dev[style.index()] = lines(&mut stream(spec.seed, &[1, s]), style, spec.dev);
        let mut rng = stream(spec.seed, &[2, s]);
        let opposite = style_words(style.opposite());
        let mut test = Vec::with_capacity(spec.test);
        let mut antonyms = Vec::with_capacity(spec.test);
        let mut alternates = Vec::with_capacity(spec.test);
        for _ in 0..spec.test {
            let sent = sample(&mut rng, style);
            let mut exact = sent.tokens.clone();
            let mut other = sent.tokens.clone();
            for &(pos, k) in &sent.slots {
                exact[pos] = opposite[k].to_string();
                other[pos] = opposite
                    [(k + 1 + rng.gen_range(0..opposite.len() - 1)) % opposite.len()]
                .to_string();
            }
            test.push(sent.tokens.join(" "));
            antonyms.push(exact.join(" "));
            alternates.push(other.join(" "));
        }
        out.test[style.index()] = test;
        out.refs[style.index()] = vec![antonyms, alternates];
    }
    out
}

pub fn ref_path(dir: &Path, style_name: &str, k: usize) -> std::path::PathBuf {
    dir.join(format!("test.{style_name}.ref{k}"))
}

impl ToyCorpus {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |path: std::path::PathBuf, lines: &[String]| {
            let mut text = lines.join("\n");
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        for style in Style::BOTH {
            let name = self.names.name(style);
            let i = style.index();
            put(corpus_path(dir, Split::Train, name), &self.train[i])?;
            put(corpus_path(dir, Split::Dev, name), &self.dev[i])?;
            put(corpus_path(dir, Split::Test, name), &self.test[i])?;
            for (k, r) in self.refs[i].iter().enumerate() {
                put(ref_path(dir, name, k), r)?;
            }
        }
        Ok(())
    }
}
