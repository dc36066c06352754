use std::fmt;

use thiserror::Error;

use super::ast::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Agent,
    Provides,
    Requires,
    Class,
    Service,
    Main,
    New,
    Go,
    Bind,
    Fork,
    Join,
    Wait,
    Notify,
    Lock,
    Unlock,
    Host,
    Exec,
    If,
    Else,
    While,
    Break,
    Return,
    Exit,
    SelfKw,
    Null,
}

impl Keyword {
    pub const ALL: [Keyword; 25] = [
        Keyword::Agent,
        Keyword::Provides,
        Keyword::Requires,
        Keyword::Class,
        Keyword::Service,
        Keyword::Main,
        Keyword::New,
        Keyword::Go,
        Keyword::Bind,
        Keyword::Fork,
        Keyword::Join,
        Keyword::Wait,
        Keyword::Notify,
        Keyword::Lock,
        Keyword::Unlock,
        Keyword::Host,
        Keyword::Exec,
        Keyword::If,
        Keyword::Else,
        Keyword::While,
        Keyword::Break,
        Keyword::Return,
        Keyword::Exit,
        Keyword::SelfKw,
        Keyword::Null,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Agent => "agent",
            Keyword::Provides => "provides",
            Keyword::Requires => "requires",
            Keyword::Class => "class",
            Keyword::Service => "service",
            Keyword::Main => "main",
            Keyword::New => "new",
            Keyword::Go => "go",
            Keyword::Bind => "bind",
            Keyword::Fork => "fork",
            Keyword::Join => "join",
            Keyword::Wait => "wait",
            Keyword::Notify => "notify",
            Keyword::Lock => "lock",
            Keyword::Unlock => "unlock",
            Keyword::Host => "host",
            Keyword::Exec => "exec",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::While => "while",
            Keyword::Break => "break",
            Keyword::Return => "return",
            Keyword::Exit => "exit",
            Keyword::SelfKw => "self",
            Keyword::Null => "null",
        }
    }

    pub fn from_word(word: &str) -> Option<Keyword> {
        Keyword::ALL.iter().copied().find(|k| k.as_str() == word)
    }
}

/// Returns true if `word` cannot be used as an identifier.
pub fn is_reserved(word: &str) -> bool {
    Keyword::from_word(word).is_some() || word == "true" || word == "false"
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    /// Lowercase-initial name: variables, methods, attributes.
    Ident(String),
    /// Uppercase-initial name: classes, agents and services.
    ClassIdent(String),
    Int(i64),
    Str(String),
    Bool(bool),
    Op(&'static str),
    Punct(char),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "keyword `{}`", k.as_str()),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::ClassIdent(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(n) => write!(f, "integer {n}"),
            TokenKind::Str(s) => write!(f, "string \"{s}\""),
            TokenKind::Bool(b) => write!(f, "`{b}`"),
            TokenKind::Op(op) => write!(f, "`{op}`"),
            TokenKind::Punct(c) => write!(f, "`{c}`"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("{0}: unterminated string literal")]
    UnterminatedString(Span),
    #[error("{0}: illegal character `{1}`")]
    IllegalCharacter(Span, char),
    #[error("{0}: integer literal out of range")]
    IntOutOfRange(Span),
}

// Longest first, so maximal munch falls out of the search order.
const OPERATORS: [&str; 16] = [
    "&&", "||", "==", "!=", "<=", ">=", "+", "-", "*", "/", "%", "^", "<", ">", "!", "=",
];

/// Splits `source` into tokens. The result always ends with an `Eof` token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let kind = if let Some(k) = Keyword::from_word(&word) {
                TokenKind::Keyword(k)
            } else if word == "true" {
                TokenKind::Bool(true)
            } else if word == "false" {
                TokenKind::Bool(false)
            } else if c.is_ascii_uppercase() {
                TokenKind::ClassIdent(word)
            } else {
                TokenKind::Ident(word)
            };
            tokens.push(Token { kind, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let digits: String = chars[start..i].iter().collect();
            let n = digits
                .parse::<i64>()
                .map_err(|_| LexError::IntOutOfRange(span))?;
            tokens.push(Token {
                kind: TokenKind::Int(n),
                span,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let start = i;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(LexError::UnterminatedString(span)),
                    Some('"') => break,
                    Some(_) => bump!(),
                }
            }
            let text: String = chars[start..i].iter().collect();
            bump!();
            tokens.push(Token {
                kind: TokenKind::Str(text),
                span,
            });
            continue;
        }
        if "(){};,.".contains(c) {
            bump!();
            tokens.push(Token {
                kind: TokenKind::Punct(c),
                span,
            });
            continue;
        }
        let op = OPERATORS.iter().find(|op| {
            op.chars()
                .enumerate()
                .all(|(k, oc)| chars.get(i + k) == Some(&oc))
        });
        match op {
            Some(op) => {
                for _ in 0..op.len() {
                    bump!();
                }
                tokens.push(Token {
                    kind: TokenKind::Op(op),
                    span,
                });
            }
            None => return Err(LexError::IllegalCharacter(span, c)),
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        span: Span::new(line, col),
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| t.kind)
            .filter(|k| *k != TokenKind::Eof)
            .collect()
    }

    #[test]
    fn simple_assignment() {
        assert_eq!(
            kinds("x = 1;"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::Op("="),
                TokenKind::Int(1),
                TokenKind::Punct(';'),
            ]
        );
    }

    #[test]
    fn keywords_are_never_identifiers() {
        for k in Keyword::ALL {
            assert_eq!(kinds(k.as_str()), vec![TokenKind::Keyword(k)]);
        }
        assert_eq!(kinds("agents"), vec![TokenKind::Ident("agents".into())]);
    }

    #[test]
    fn string_literal() {
        assert_eq!(
            kinds("\"ftp.adomain\""),
            vec![TokenKind::Str("ftp.adomain".into())]
        );
    }

    #[test]
    fn unterminated_string() {
        assert!(matches!(
            tokenize("x = \"abc\n\";"),
            Err(LexError::UnterminatedString(_))
        ));
        assert!(matches!(
            tokenize("\"abc"),
            Err(LexError::UnterminatedString(_))
        ));
    }

    #[test]
    fn illegal_character() {
        assert!(matches!(
            tokenize("x = #;"),
            Err(LexError::IllegalCharacter(_, '#'))
        ));
    }

    #[test]
    fn maximal_munch_and_comments() {
        assert_eq!(
            kinds("a<=b // trailing\n!= !x"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Op("<="),
                TokenKind::Ident("b".into()),
                TokenKind::Op("!="),
                TokenKind::Op("!"),
                TokenKind::Ident("x".into()),
            ]
        );
    }

    #[test]
    fn primed_identifiers_and_classes() {
        assert_eq!(
            kinds("x' Time"),
            vec![
                TokenKind::Ident("x'".into()),
                TokenKind::ClassIdent("Time".into())
            ]
        );
    }

    #[test]
    fn positions_track_lines() {
        let toks = tokenize("a\n  b").unwrap();
        assert_eq!((toks[1].span.line, toks[1].span.col), (2, 3));
    }
}
