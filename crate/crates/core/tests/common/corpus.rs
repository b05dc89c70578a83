//! Hand-labelled model outputs. Expected lists were worked out from the scan
//! rules by hand: digit runs, numbered-list enumerators skipped, duplicates
//! dropped, range check, then truncation to K.

pub struct Case {
    pub name: &'static str,
    pub text: &'static str,
    pub universe: u32,
    pub k: usize,
    pub items: &'static [u32],
    pub hallucinated: &'static [u64],
}

const N: u32 = 1682;

const fn case(
    name: &'static str,
    text: &'static str,
    universe: u32,
    k: usize,
    items: &'static [u32],
    hallucinated: &'static [u64],
) -> Case {
    Case {
        name,
        text,
        universe,
        k,
        items,
        hallucinated,
    }
}

pub const CORPUS: &[Case] = &[
    // canonical lines
    case("canonical", "42,15,301,2,104", N, 5, &[42, 15, 301, 2, 104], &[]),
    case(
        "canonical spaced",
        "42, 15, 301, 2, 104",
        N,
        5,
        &[42, 15, 301, 2, 104],
        &[],
    ),
    case("space separated", "42 15 301 2 104", N, 5, &[42, 15, 301, 2, 104], &[]),
    case("bracketed", "[42, 15, 301, 2, 104]", N, 5, &[42, 15, 301, 2, 104], &[]),
    case(
        "trailing newline",
        "42,15,301,2,104\n",
        N,
        5,
        &[42, 15, 301, 2, 104],
        &[],
    ),
    case("padded", "  42,15,301,2,104  ", N, 5, &[42, 15, 301, 2, 104], &[]),
    case("semicolons", "42;15;301;2;104", N, 5, &[42, 15, 301, 2, 104], &[]),
    case("pipes", "42|15|301|2|104", N, 5, &[42, 15, 301, 2, 104], &[]),
    case("too many", "1,2,3,4,5,6,7", N, 5, &[1, 2, 3, 4, 5], &[]),
    case("universe edges", "1682,1,1681", N, 5, &[1682, 1, 1681], &[]),
    case("quoted", "\"42\",\"15\"", N, 5, &[42, 15], &[]),
    case("short list", "42,15,301", N, 5, &[42, 15, 301], &[]),
    case("newline separated", "5\n6\n7", N, 5, &[5, 6, 7], &[]),
    case("leading zeros", "0042", N, 5, &[42], &[]),
    case("leading zeros duplicate", "007, 7", N, 5, &[7], &[]),
    // ids embedded in prose
    case(
        "prose duplicate and out of range",
        "I recommend item 5, then 99999, then 5 again.",
        N,
        5,
        &[5],
        &[99999],
    ),
    case(
        "prose list",
        "Based on the history, the user may like 50, 181 and 100.",
        N,
        5,
        &[50, 181, 100],
        &[],
    ),
    case(
        "prose preamble",
        "Sure! Here are the recommendations: 7, 8, 9, 10, 11.",
        N,
        5,
        &[7, 8, 9, 10, 11],
        &[],
    ),
    case(
        "titles in parentheses",
        "Item IDs: 12 (Star Wars), 34 (Fargo).",
        N,
        5,
        &[12, 34],
        &[],
    ),
    case(
        "count in prose",
        "The top 5 items are 3,4,5,6,7",
        N,
        5,
        &[5, 3, 4, 6, 7],
        &[],
    ),
    case(
        "prefixed ids",
        "Recommendation: item_101, item_202, item_303",
        N,
        5,
        &[101, 202, 303],
        &[],
    ),
    case(
        "trailing sentence",
        "Output: 42,15,301,2,104. These are most likely.",
        N,
        5,
        &[42, 15, 301, 2, 104],
        &[],
    ),
    case("hash marks", "Movies #10 and #20", N, 5, &[10, 20], &[]),
    case("signs ignored", "IDs -5, +6", N, 5, &[5, 6], &[]),
    case("decimal rating", "3.5 stars for item 20", N, 5, &[3, 5, 20], &[]),
    case("decimal alone", "1.5 stars", N, 5, &[1, 5], &[]),
    case("thousands separator", "Item 1,000 is popular", N, 5, &[1], &[0]),
    case("version string", "version v2.0 suggests 88", N, 5, &[2, 88], &[0]),
    case("year out of range", "year 1995 film 12", N, 5, &[12], &[1995]),
    case("glued letters", "12abc34", N, 5, &[12, 34], &[]),
    case("sentence ending number", "Answer 1.", N, 5, &[1], &[]),
    // numbered lists
    case(
        "numbered list truncated",
        "Top picks:\n1. 10\n2. 20\n3. 30",
        N,
        2,
        &[10, 20],
        &[],
    ),
    case(
        "numbered five",
        "1. 10\n2. 20\n3. 30\n4. 40\n5. 50",
        N,
        5,
        &[10, 20, 30, 40, 50],
        &[],
    ),
    case("paren enumerators", "1) 10\n2) 20\n3) 30", N, 5, &[10, 20, 30], &[]),
    case("enumerator then words", "1. Item 10\n2. Item 20", N, 5, &[10, 20], &[]),
    case("indented enumerators", "  1. 10\n  2. 20", N, 5, &[10, 20], &[]),
    case("crlf enumerators", "1. 10\r\n2. 20\r\n", N, 5, &[10, 20], &[]),
    case(
        "enumerated with year",
        "1. 10 (Toy Story, 1995)\n2. 20",
        N,
        5,
        &[10, 20],
        &[1995],
    ),
    case("skipped number breaks list", "1. 10\n3. 30", N, 5, &[1, 10, 3, 30], &[]),
    case("list not starting at one", "2) 10\n3) 30", N, 5, &[2, 10, 3, 30], &[]),
    case("bare enumerator line", "1.\n2. 20", N, 5, &[20], &[]),
    case("ids equal to enumerators", "1. 1\n2. 2\n3. 3", N, 5, &[1, 2, 3], &[]),
    case("interleaved prose", "Here:\n1. 5\nthen\n2. 6", N, 5, &[5, 6], &[]),
    case("no space after dot", "1.10\n2.20", N, 5, &[1, 10, 2, 20], &[]),
    case("mid-line marker", "1. 10 2. 20", N, 5, &[10, 2, 20], &[]),
    case("enumerated duplicate", "1. 10\n2. 10", N, 5, &[10], &[]),
    case("enumerated hallucination", "1. 99999\n2. 7", N, 5, &[7], &[99999]),
    // hallucinated ids
    case("zero", "0", N, 5, &[], &[0]),
    case("just past universe", "1683", N, 5, &[], &[1683]),
    case("overflow saturates", "99999999999999999999999", N, 5, &[], &[u64::MAX]),
    case("duplicate hallucination", "5, 2000, 2000, 6", N, 5, &[5, 6], &[2000]),
    case("all invalid", "11,12,13,14,15", 10, 5, &[], &[11, 12, 13, 14, 15]),
    case(
        "truncation keeps hallucinations",
        "1,2,3,900,4,5",
        10,
        2,
        &[1, 2],
        &[900],
    ),
    case("universe of one", "42,15", 1, 5, &[], &[42, 15]),
    case("universe of one repeated", "1,1,1,1", 1, 5, &[1], &[]),
    // nothing to extract
    case("empty", "", N, 5, &[], &[]),
    case("whitespace", "   \n\t ", N, 5, &[], &[]),
    case("refusal", "I cannot make a recommendation.", N, 5, &[], &[]),
    case("letters only", "No IDs here: a, b, c.", N, 5, &[], &[]),
    case("fullwidth digits", "\u{ff14}\u{ff12}", N, 5, &[], &[]),
    case("arabic-indic digit", "\u{0663}", N, 5, &[], &[]),
];
