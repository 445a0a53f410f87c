use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Assign,
    Arrow,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Newline,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Num(n) => return write!(f, "number {n}"),
            Tok::Str(s) => return write!(f, "string {s:?}"),
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Comma => "`,`",
            Tok::Colon => "`:`",
            Tok::Dot => "`.`",
            Tok::Assign => "`=`",
            Tok::Arrow => "`->`",
            Tok::EqEq => "`==`",
            Tok::Ne => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Percent => "`%`",
            Tok::Newline => "end of line",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// Source text of the token (empty for newline and end of input).
    pub text: String,
}

/// A lexical problem, reported with 1-based position.
#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub text: String,
}

/// Splits source into tokens. Newlines are significant except inside
/// parentheses (a brace ends any open parenthesis run); `#` starts a
/// comment running to the end of the line.
/// Lexing continues past errors so every one is reported.
pub fn lex(src: &str) -> (Vec<Token>, Vec<LexError>) {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut errs = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut depth = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let push = |toks: &mut Vec<Token>, tok: Tok, text: String| {
            toks.push(Token {
                tok,
                line: start_line,
                col: start_col,
                text,
            })
        };
        if c == '\n' {
            if depth == 0 && !matches!(toks.last(), Some(Token { tok: Tok::Newline, .. }) | None) {
                push(&mut toks, Tok::Newline, String::new());
            }
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let s: String = chars[i..]
                .iter()
                .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                .collect();
            i += s.len();
            col += s.len();
            push(&mut toks, Tok::Ident(s.clone()), s);
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[i..j].iter().collect();
            col += j - i;
            i = j;
            match text.parse::<f64>() {
                Ok(n) if n.is_finite() => push(&mut toks, Tok::Num(n), text),
                _ => errs.push(LexError {
                    line: start_line,
                    col: start_col,
                    message: "number out of range".into(),
                    text,
                }),
            }
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            let mut value = String::new();
            let mut closed = false;
            let mut bad_escape = None;
            while j < chars.len() && chars[j] != '\n' {
                match chars[j] {
                    '"' => {
                        closed = true;
                        j += 1;
                        break;
                    }
                    '\\' if j + 1 < chars.len() => {
                        match chars[j + 1] {
                            '"' => value.push('"'),
                            '\\' => value.push('\\'),
                            'n' => value.push('\n'),
                            't' => value.push('\t'),
                            other => {
                                bad_escape.get_or_insert(other);
                            }
                        }
                        j += 2;
                    }
                    ch => {
                        value.push(ch);
                        j += 1;
                    }
                }
            }
            let text: String = chars[i..j].iter().collect();
            col += j - i;
            i = j;
            if !closed {
                errs.push(LexError {
                    line: start_line,
                    col: start_col,
                    message: "unterminated string".into(),
                    text,
                });
            } else if let Some(e) = bad_escape {
                errs.push(LexError {
                    line: start_line,
                    col: start_col,
                    message: format!("unknown escape `\\{e}`"),
                    text,
                });
            } else {
                push(&mut toks, Tok::Str(value), text);
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('=', _) => (Tok::Assign, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('{', _) => {
                depth = 0;
                (Tok::LBrace, 1)
            }
            ('}', _) => {
                depth = 0;
                (Tok::RBrace, 1)
            }
            ('(', _) => {
                depth += 1;
                (Tok::LParen, 1)
            }
            (')', _) => {
                depth = depth.saturating_sub(1);
                (Tok::RParen, 1)
            }
            (',', _) => (Tok::Comma, 1),
            (':', _) => (Tok::Colon, 1),
            ('.', _) => (Tok::Dot, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('%', _) => (Tok::Percent, 1),
            _ => {
                errs.push(LexError {
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                    text: c.to_string(),
                });
                i += 1;
                col += 1;
                continue;
            }
        };
        let text: String = chars[i..i + len].iter().collect();
        i += len;
        col += len;
        push(&mut toks, tok, text);
    }
    if !matches!(toks.last(), Some(Token { tok: Tok::Newline, .. }) | None) {
        toks.push(Token {
            tok: Tok::Newline,
            line,
            col,
            text: String::new(),
        });
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
        text: String::new(),
    });
    (toks, errs)
}
