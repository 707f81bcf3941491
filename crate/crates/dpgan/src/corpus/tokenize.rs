//! Lowercased whitespace/punctuation tokenization with sentence
//! boundaries at `.` `!` `?` followed by whitespace or end of input.

/// Split raw text into sentences of tokens. Empty input yields an empty
/// list. Apostrophes stay inside words ("i've"); any other
/// non-alphanumeric character becomes its own token.
pub fn tokenize(text: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    for span in sentence_spans(text) {
        let toks = tokenize_sentence(span);
        if !toks.is_empty() {
            sentences.push(toks);
        }
    }
    sentences
}

/// Join tokens back with single spaces; preserves the token multiset.
pub fn detokenize(sentences: &[Vec<String>]) -> String {
    sentences
        .iter()
        .map(|s| s.join(" "))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sentence_spans(text: &str) -> Vec<&str> {
    let mut spans = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if matches!(c, '.' | '!' | '?') {
            let next = iter.peek().map(|&(_, n)| n);
            if next.is_none() || next.is_some_and(char::is_whitespace) {
                let end = i + c.len_utf8();
                spans.push(&text[start..end]);
                start = end;
            }
        }
    }
    if start < bytes.len() {
        spans.push(&text[start..]);
    }
    spans
}

fn tokenize_sentence(span: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in span.chars() {
        if c.is_alphanumeric() || c == '\'' {
            for lc in c.to_lowercase() {
                word.push(lc);
            }
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_sentences_and_punctuation() {
        let got = tokenize("Food is good. Love it!");
        assert_eq!(
            got,
            vec![
                vec!["food", "is", "good", "."],
                vec!["love", "it", "!"],
            ]
        );
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn decimal_point_does_not_split() {
        let got = tokenize("rated 3.5 stars");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0], vec!["rated", "3", ".", "5", "stars"]);
    }

    #[test]
    fn apostrophes_stay_in_words() {
        let got = tokenize("I've been there.");
        assert_eq!(got[0][0], "i've");
    }

    #[test]
    fn detokenize_preserves_token_multiset() {
        let text = "The food, honestly, was great! Service too. 10/10 would return?";
        let sents = tokenize(text);
        let round = tokenize(&detokenize(&sents));
        let mut a: Vec<String> = sents.into_iter().flatten().collect();
        let mut b: Vec<String> = round.into_iter().flatten().collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
