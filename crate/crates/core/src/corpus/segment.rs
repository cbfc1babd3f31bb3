/// Tokens that end in a period without ending a sentence. Compared lowercase.
const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "vs.", "fig.", "figs.", "al.", "etc.", "approx.", "cf.", "ca.", "dr.", "no.",
    "resp.", "eq.", "ref.", "vol.", "st.", "mr.", "mrs.", "ms.", "prof.", "jr.", "sr.", "inc.",
    "ltd.", "co.", "u.s.", "u.k.", "min.", "max.", "tab.", "sect.",
];

/// Split an abstract into sentences.
///
/// A boundary is a `.`, `?` or `!` (optionally followed by closing quotes or
/// brackets) that is followed by whitespace and then an uppercase letter or a
/// digit. Periods closing a known abbreviation, a single-letter initial, or
/// sitting between two digits never split.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '?' | '!') {
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end].1, '"' | '\'' | ')' | ']' | '\u{201d}') {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let has_gap = next > end;
            let opens_sentence = next < chars.len()
                && (chars[next].1.is_uppercase() || chars[next].1.is_ascii_digit());
            if has_gap && opens_sentence && !(c == '.' && guarded(&chars, i)) {
                let byte_end = byte_at(&chars, end, text.len());
                push_trimmed(&mut sentences, &text[start..byte_end]);
                start = byte_at(&chars, next, text.len());
                i = next;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(&mut sentences, &text[start..]);
    if sentences.is_empty() {
        sentences.push(text.trim().to_string());
    }
    sentences
}

fn byte_at(chars: &[(usize, char)], idx: usize, len: usize) -> usize {
    chars.get(idx).map_or(len, |&(b, _)| b)
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// True when the period at `dot` belongs to an abbreviation, an initial or a
/// decimal number.
fn guarded(chars: &[(usize, char)], dot: usize) -> bool {
    let prev = dot.checked_sub(1).map(|p| chars[p].1);
    let next = chars.get(dot + 1).map(|&(_, c)| c);
    if prev.is_some_and(|c| c.is_ascii_digit()) && next.is_some_and(|c| c.is_ascii_digit()) {
        return true;
    }

    let mut tok_start = dot;
    while tok_start > 0 && !chars[tok_start - 1].1.is_whitespace() {
        tok_start -= 1;
    }
    let token: String = chars[tok_start..=dot]
        .iter()
        .map(|&(_, c)| c)
        .collect::<String>()
        .trim_start_matches(['(', '[', '"', '\''])
        .to_lowercase();

    if ABBREVIATIONS.contains(&token.as_str()) {
        return true;
    }
    // single-letter initial such as "J."
    let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
    token.len() == 2 && letters.len() == 1 && chars[dot - 1].1.is_uppercase()
}
