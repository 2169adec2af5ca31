//! Bundled word lists: function words with their tags and a small
//! gazetteer for named entities.

use super::knowledge::{NerTag, PosTag};

const DET: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "either", "neither", "some", "any", "no",
    "all", "both", "another", "such", "what", "which", "whose", "few", "many", "much", "more", "most", "less",
    "several", "other",
];
const PRON: &[&str] = &[
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "yourselves", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our", "ours", "ourselves",
    "they", "them", "their", "theirs", "themselves", "who", "whom", "whoever", "whatever", "whichever", "someone",
    "somebody", "something", "anyone", "anybody", "anything", "everyone", "everybody", "everything", "nobody",
    "nothing", "none", "one",
];
const ADP: &[&str] = &[
    "of", "in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during",
    "before", "after", "above", "below", "to", "from", "up", "down", "out", "off", "over", "under", "than",
    "among", "across", "along", "around", "behind", "beside", "besides", "beyond", "despite", "except", "inside",
    "near", "onto", "outside", "per", "since", "toward", "towards", "upon", "via", "within", "without",
    "throughout", "amid", "like",
];
const CONJ: &[&str] = &[
    "and", "or", "but", "nor", "so", "yet", "because", "although", "though", "while", "whereas", "if", "unless",
    "until", "whether", "as", "once", "when", "where", "whenever", "wherever",
];
const PRT: &[&str] = &["not", "n't", "'s"];
const AUX: &[&str] = &[
    "be", "is", "am", "are", "was", "were", "been", "being", "have", "has", "had", "having", "do", "does", "did",
    "doing", "will", "would", "shall", "should", "can", "could", "may", "might", "must", "ought",
];
const ADV: &[&str] = &[
    "very", "too", "also", "just", "only", "then", "here", "there", "now", "how", "why", "quite", "rather",
    "almost", "again", "further", "even", "still",
];

/// Function words with their part-of-speech tag, in a fixed order.
pub fn function_words() -> impl Iterator<Item = (&'static str, PosTag)> {
    let groups: [(&'static [&'static str], PosTag); 7] = [
        (DET, PosTag::Det),
        (PRON, PosTag::Pron),
        (ADP, PosTag::Adp),
        (CONJ, PosTag::Conj),
        (PRT, PosTag::Prt),
        (AUX, PosTag::Verb),
        (ADV, PosTag::Adv),
    ];
    groups.into_iter().flat_map(|(ws, t)| ws.iter().map(move |w| (*w, t)))
}

pub fn function_word_tag(lower: &str) -> Option<PosTag> {
    use std::collections::HashMap;
    use std::sync::OnceLock;
    static MAP: OnceLock<HashMap<&'static str, PosTag>> = OnceLock::new();
    MAP.get_or_init(|| {
        let mut m = HashMap::new();
        for (w, t) in function_words() {
            m.entry(w).or_insert(t);
        }
        m
    })
    .get(lower)
    .copied()
}

pub fn is_function_word(lower: &str) -> bool {
    function_word_tag(lower).is_some()
}

pub const PLACES: &[&str] = &[
    "Paris", "London", "Tokyo", "Berlin", "Rome", "Madrid", "Vienna", "Cairo", "Lima", "Oslo", "Seoul", "Beijing",
    "Moscow", "Sydney", "Toronto", "Chicago", "Boston", "Africa", "Asia", "Europe", "America", "Canada", "China",
    "Japan", "India", "France", "Germany", "Italy", "Spain", "Brazil", "Mexico", "Egypt", "Kenya", "Peru",
    "Chile", "Norway", "Sweden", "Ireland", "Scotland", "Texas", "California", "Atlantic", "Pacific", "Nile",
    "Alps",
];
pub const PERSONS: &[&str] = &[
    "John", "Mary", "James", "Robert", "Michael", "William", "David", "Richard", "Joseph", "Thomas", "Charles",
    "Elizabeth", "Sarah", "Emma", "Anna", "Maria", "Peter", "Paul", "George", "Henry", "Alice", "Laura", "Darwin",
    "Newton", "Einstein", "Shakespeare", "Smith", "Johnson", "Brown", "Miller", "Davis", "Wilson",
];
pub const ORGS: &[&str] = &[
    "UNESCO", "NASA", "Google", "Microsoft", "IBM", "UNICEF", "Oxford", "Cambridge", "Harvard", "Stanford",
    "Reuters", "Toyota", "Siemens", "Nokia", "Intel", "Samsung", "Sony", "BBC",
];

pub fn gazetteer(word: &str) -> Option<NerTag> {
    if PLACES.contains(&word) {
        Some(NerTag::Place)
    } else if PERSONS.contains(&word) {
        Some(NerTag::Person)
    } else if ORGS.contains(&word) {
        Some(NerTag::Org)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_has_about_180_entries() {
        let mut v: Vec<_> = function_words().map(|(w, _)| w).collect();
        v.sort();
        v.dedup();
        assert!((170..=230).contains(&v.len()), "{}", v.len());
        assert!(is_function_word("the") && !is_function_word("quick"));
    }
}
