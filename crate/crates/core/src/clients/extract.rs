use super::ClientError;

/// Pulls the equation out of a chat reply: trims, removes one enclosing code
/// fence and a leading `Output:` label, repeating until nothing changes.
pub fn extract_latex(raw: &str) -> Result<String, ClientError> {
    let mut current = raw.trim();
    loop {
        let next = strip_label(strip_fence(current));
        if next == current {
            break;
        }
        current = next;
    }
    if current.is_empty() {
        Err(ClientError::EmptyLatex)
    } else {
        Ok(current.to_owned())
    }
}

fn strip_fence(s: &str) -> &str {
    let s = s.trim();
    let Some(rest) = s.strip_prefix("```") else {
        return s;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return s;
    };
    // Drop an info string such as `latex` on the opening line.
    match body.split_once('\n') {
        Some((info, inner)) if !info.trim().contains(char::is_whitespace) => inner.trim(),
        _ => body.trim(),
    }
}

fn strip_label(s: &str) -> &str {
    s.strip_prefix("Output:").map(str::trim).unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(extract_latex("```latex\n\\frac{1}{2}\n```").unwrap(), "\\frac{1}{2}");
        assert_eq!(extract_latex("x+y").unwrap(), "x+y");
        assert_eq!(extract_latex("Output: a^2").unwrap(), "a^2");
        assert_eq!(extract_latex("  ```\nx\n```  ").unwrap(), "x");
        assert_eq!(extract_latex("Output: ```tex\nx\n```").unwrap(), "x");
    }

    #[test]
    fn empty() {
        assert!(matches!(extract_latex("   "), Err(ClientError::EmptyLatex)));
        assert!(matches!(extract_latex("```\n```"), Err(ClientError::EmptyLatex)));
        assert!(matches!(extract_latex("Output:"), Err(ClientError::EmptyLatex)));
    }

    #[test]
    fn unterminated_fence_kept() {
        assert_eq!(extract_latex("```latex\nx").unwrap(), "```latex\nx");
    }
}
