//! Prompt fixture: three ML-100K titles and their expected renderings.

use std::collections::HashMap;

use indexmap::IndexMap;
use seqbench::dataset::{ItemRecord, ItemStats, ItemStatsTable, UserSequence};
use seqbench::prompt::{PromptConfig, PromptEngine, PromptMode};

fn record(item_id: u32, title: &str, category: &str) -> ItemRecord {
    let mut attributes = IndexMap::new();
    attributes.insert("title".to_string(), title.to_string());
    attributes.insert("category".to_string(), category.to_string());
    ItemRecord { item_id, attributes }
}

fn fixture() -> (Vec<ItemRecord>, ItemStatsTable) {
    let catalog = vec![
        record(1, "Toy Story", "Animation, Children's, Comedy"),
        record(50, "Star Wars", "Action, Adventure, Romance, Sci-Fi, War"),
        record(181, "Return of the Jedi", "Action, Adventure, Romance, Sci-Fi, War"),
    ];
    let stats = [(1, 452, 3.878), (50, 583, 4.358), (181, 507, 4.007)]
        .into_iter()
        .map(|(item_id, popularity, q)| ItemStats {
            item_id,
            popularity,
            quality: Some(q),
        })
        .collect();
    (catalog, stats)
}

pub fn render(mode: PromptMode, seq: &UserSequence) -> String {
    let (catalog, stats) = fixture();
    let map: HashMap<u32, &ItemRecord> = catalog.iter().map(|r| (r.item_id, r)).collect();
    let engine = PromptEngine::new(&map, &stats, 1682);
    let cfg = PromptConfig {
        mode,
        recommendation_length: 5,
        dataset_name: "ML-100K".into(),
    };
    engine.render(seq, &cfg).unwrap().text
}

pub fn seq() -> UserSequence {
    UserSequence {
        user_id: 7,
        history: vec![1, 50, 181],
        ground_truth: 2,
    }
}

pub const GENERAL: &str = "A user has the following watched item history (internal Item IDs): 1,50,181.\n\
                           Based on this history, predict ONLY the top 5 most likely next item IDs for this user.";

pub fn augmented() -> String {
    [
        "You are an accurate recommendation system for the ML-100K.",
        "A user with ID 7 has the following watched item history (internal Item IDs) with item information: \
         1 (Title: Toy Story; Category: Animation, Children's, Comedy; Rating: 3.9), \
         50 (Title: Star Wars; Category: Action, Adventure, Romance, Sci-Fi, War; Rating: 4.4), \
         181 (Title: Return of the Jedi; Category: Action, Adventure, Romance, Sci-Fi, War; Rating: 4.0).",
        "Based on this history, predict ONLY the top 5 most likely next item IDs for this user.",
        "Each item ID must be an integer between 1 and 1682.",
        "Output the predicted item IDs in order of likelihood, from most to least likely.",
        "Important: Do not include any additional text, explanations, or formatting!",
        "Output format: A single line of exactly 5 comma-separated integers.",
        "No explanation, no text, no line breaks.",
        "Example (correct format):",
        "42,15,301,2,104",
        "Now generate the output:",
    ]
    .join("\n")
}
