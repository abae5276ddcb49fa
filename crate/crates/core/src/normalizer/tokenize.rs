/// Splits LaTeX source into tokens.
///
/// A backslash followed by ASCII letters is one command token (`\frac`); a
/// backslash followed by any other non-space character is a two-character
/// control symbol (`\,`, `\{`, `\\`). Runs of ASCII digits and runs of ASCII
/// letters are single tokens. Every other character, including each non-ASCII
/// letter, is its own token. Whitespace separates tokens and is dropped, so
/// concatenating the output gives the input minus its whitespace.
pub fn tokenize_latex(input: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut iter = input.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if c.is_whitespace() {
            continue;
        }
        let end = if c == '\\' {
            match iter.peek().copied() {
                Some((_, n)) if n.is_ascii_alphabetic() => {
                    take_while(&mut iter, |ch| ch.is_ascii_alphabetic(), input.len())
                }
                Some((i, n)) if !n.is_whitespace() => {
                    iter.next();
                    i + n.len_utf8()
                }
                _ => start + 1,
            }
        } else if c.is_ascii_digit() {
            take_while(&mut iter, |ch| ch.is_ascii_digit(), input.len())
        } else if c.is_ascii_alphabetic() {
            take_while(&mut iter, |ch| ch.is_ascii_alphabetic(), input.len())
        } else {
            start + c.len_utf8()
        };
        tokens.push(&input[start..end]);
    }
    tokens
}

fn take_while(
    iter: &mut std::iter::Peekable<std::str::CharIndices<'_>>,
    pred: impl Fn(char) -> bool,
    len: usize,
) -> usize {
    while let Some(&(i, ch)) = iter.peek() {
        if !pred(ch) {
            return i;
        }
        iter.next();
    }
    len
}

/// True for `\name` command tokens and two-character control symbols.
pub(crate) fn is_command(token: &str) -> bool {
    token.starts_with('\\') && token.len() > 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac() {
        assert_eq!(tokenize_latex("\\frac{a}{b}"), ["\\frac", "{", "a", "}", "{", "b", "}"]);
    }

    #[test]
    fn empty() {
        assert!(tokenize_latex("").is_empty());
        assert!(tokenize_latex("  \t\n").is_empty());
    }

    #[test]
    fn digit_runs() {
        assert_eq!(tokenize_latex("x+12"), ["x", "+", "12"]);
        assert_eq!(tokenize_latex("ab12cd"), ["ab", "12", "cd"]);
    }

    #[test]
    fn control_symbols_and_unicode() {
        assert_eq!(tokenize_latex("a\\,b\\\\c"), ["a", "\\,", "b", "\\\\", "c"]);
        assert_eq!(tokenize_latex("αβ=\\pi"), ["α", "β", "=", "\\pi"]);
        assert_eq!(tokenize_latex("x \\ y\\"), ["x", "\\", "y", "\\"]);
        assert_eq!(tokenize_latex("\\alpha x"), ["\\alpha", "x"]);
    }
}
