//! Language-lite tokenizer for Java-ish source.
//!
//! Comments, string/char literals, braces, semicolons, identifiers and
//! keywords come out as typed tokens; `&&` and `||` stay fused so the
//! strict complexity counter can see them. Gaps between tokens are spaces,
//! tabs and carriage returns only, so concatenating token texts plus that
//! whitespace reproduces the input exactly.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    LineComment,
    BlockComment,
    Str,
    Char,
    Ident,
    Keyword,
    Punct,
    BraceOpen,
    BraceClose,
    Semicolon,
    Newline,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the token's first character.
    pub line: u32,
}

impl Token {
    /// Lines this token spans (block comments may cover several).
    #[must_use]
    pub fn line_span(&self) -> (u32, u32) {
        let extra = self.text.matches('\n').count() as u32;
        (self.line, self.line + extra)
    }

    #[must_use]
    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokenKind::LineComment | TokenKind::BlockComment)
    }

    /// Anything that is neither a comment nor a newline.
    #[must_use]
    pub fn is_code(&self) -> bool {
        !self.is_comment() && self.kind != TokenKind::Newline
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.binary_search(&s).is_ok()
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

pub struct TokenizeResult {
    pub tokens: Vec<Token>,
    pub warnings: Vec<String>,
}

/// Tokenizes `text`. Never fails: unterminated constructs consume to end
/// of input (block comments additionally produce a warning).
#[must_use]
pub fn tokenize(text: &str) -> TokenizeResult {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut warnings = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;
    let n = chars.len();

    let slice = |from: usize, to: usize| -> String { chars[from..to].iter().collect() };

    while i < n {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '\n' => {
                tokens.push(Token {
                    kind: TokenKind::Newline,
                    text: "\n".into(),
                    line,
                });
                line += 1;
                i += 1;
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                let start = i;
                while i < n && chars[i] != '\n' {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::LineComment,
                    text: slice(start, i),
                    line,
                });
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                let start = i;
                let start_line = line;
                i += 2;
                let mut closed = false;
                while i < n {
                    if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                        i += 2;
                        closed = true;
                        break;
                    }
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                if !closed {
                    warnings.push(format!("unterminated block comment starting on line {start_line}"));
                }
                tokens.push(Token {
                    kind: TokenKind::BlockComment,
                    text: slice(start, i),
                    line: start_line,
                });
            }
            '"' | '\'' => {
                let quote = c;
                let start = i;
                i += 1;
                while i < n && chars[i] != quote && chars[i] != '\n' {
                    if chars[i] == '\\' && i + 1 < n && chars[i + 1] != '\n' {
                        i += 1;
                    }
                    i += 1;
                }
                if i < n && chars[i] == quote {
                    i += 1;
                }
                tokens.push(Token {
                    kind: if quote == '"' { TokenKind::Str } else { TokenKind::Char },
                    text: slice(start, i),
                    line,
                });
            }
            '{' => {
                tokens.push(Token {
                    kind: TokenKind::BraceOpen,
                    text: "{".into(),
                    line,
                });
                i += 1;
            }
            '}' => {
                tokens.push(Token {
                    kind: TokenKind::BraceClose,
                    text: "}".into(),
                    line,
                });
                i += 1;
            }
            ';' => {
                tokens.push(Token {
                    kind: TokenKind::Semicolon,
                    text: ";".into(),
                    line,
                });
                i += 1;
            }
            '&' | '|' if chars.get(i + 1) == Some(&c) => {
                tokens.push(Token {
                    kind: TokenKind::Punct,
                    text: slice(i, i + 2),
                    line,
                });
                i += 2;
            }
            _ if is_ident_start(c) => {
                let start = i;
                while i < n && is_ident_continue(chars[i]) {
                    i += 1;
                }
                let text = slice(start, i);
                let kind = if is_keyword(&text) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Ident
                };
                tokens.push(Token { kind, text, line });
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < n
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Punct,
                    text: slice(start, i),
                    line,
                });
            }
            _ => {
                tokens.push(Token {
                    kind: TokenKind::Punct,
                    text: c.to_string(),
                    line,
                });
                i += 1;
            }
        }
    }
    TokenizeResult { tokens, warnings }
}

/// Per-line code/comment presence, 1-based indexing via `has_*[line-1]`.
pub struct LineProfile {
    pub total_lines: usize,
    pub has_code: Vec<bool>,
    pub has_comment: Vec<bool>,
}

impl LineProfile {
    #[must_use]
    pub fn blank_count(&self) -> usize {
        (0..self.total_lines)
            .filter(|&i| !self.has_code[i] && !self.has_comment[i])
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    /// Carries at least one code token (possibly a trailing comment too).
    Code,
    /// Comment tokens only.
    Comment,
    Blank,
}

#[must_use]
pub fn line_profile(text: &str, tokens: &[Token]) -> LineProfile {
    let total_lines = count_lines(text);
    let mut has_code = vec![false; total_lines];
    let mut has_comment = vec![false; total_lines];
    for tok in tokens {
        let (a, b) = tok.line_span();
        if tok.is_comment() {
            for l in a..=b {
                if let Some(slot) = has_comment.get_mut(l as usize - 1) {
                    *slot = true;
                }
            }
        } else if tok.is_code() {
            for l in a..=b {
                if let Some(slot) = has_code.get_mut(l as usize - 1) {
                    *slot = true;
                }
            }
        }
    }
    LineProfile {
        total_lines,
        has_code,
        has_comment,
    }
}

/// Physical line count; a trailing newline does not open a final empty line.
#[must_use]
pub fn count_lines(text: &str) -> usize {
    if text.is_empty() {
        return 0;
    }
    let newlines = text.matches('\n').count();
    if text.ends_with('\n') {
        newlines
    } else {
        newlines + 1
    }
}

/// Classifies each physical line for the label-time noise filter.
#[must_use]
pub fn classify_lines(text: &str) -> Vec<LineKind> {
    let result = tokenize(text);
    let profile = line_profile(text, &result.tokens);
    (0..profile.total_lines)
        .map(|i| {
            if profile.has_code[i] {
                LineKind::Code
            } else if profile.has_comment[i] {
                LineKind::Comment
            } else {
                LineKind::Blank
            }
        })
        .collect()
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Token texts plus inter-token whitespace reproduce the input.
        #[test]
        fn round_trip_arbitrary_ascii(text in "[ -~\n\t]{0,200}") {
            let result = tokenize(&text);
            let mut pos = 0;
            for tok in &result.tokens {
                while !text[pos..].starts_with(tok.text.as_str()) {
                    prop_assert!(matches!(text.as_bytes().get(pos), Some(b' ' | b'\t' | b'\r')));
                    pos += 1;
                }
                pos += tok.text.len();
            }
            for &b in &text.as_bytes()[pos..] {
                prop_assert!(matches!(b, b' ' | b'\t' | b'\r'));
            }
        }

        /// Newline tokens agree with the physical line count.
        #[test]
        fn newline_tokens_match_line_structure(text in "[a-z;{}\n ]{0,100}") {
            let result = tokenize(&text);
            let newlines = result.tokens.iter().filter(|t| t.kind == TokenKind::Newline).count();
            prop_assert_eq!(newlines, text.matches('\n').count());
        }

        /// Every line gets exactly one classification.
        #[test]
        fn classification_is_total(text in "[a-z;{}/* \n]{0,150}") {
            let classes = classify_lines(&text);
            prop_assert_eq!(classes.len(), count_lines(&text));
        }
    }
}
