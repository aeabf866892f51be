//! Hand-rolled lexer for MiniC. `//` line comments and `/* */` block
//! comments are skipped.

use super::ParseError;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TokKind {
    Ident,
    Int,
    KwInt,
    KwVoid,
    KwRecord,
    KwIf,
    KwElse,
    KwWhile,
    KwReturn,
    KwAssume,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl TokKind {
    pub fn describe(&self) -> &'static str {
        match self {
            TokKind::Ident => "identifier",
            TokKind::Int => "integer literal",
            TokKind::KwInt => "`int`",
            TokKind::KwVoid => "`void`",
            TokKind::KwRecord => "`record`",
            TokKind::KwIf => "`if`",
            TokKind::KwElse => "`else`",
            TokKind::KwWhile => "`while`",
            TokKind::KwReturn => "`return`",
            TokKind::KwAssume => "`assume`",
            TokKind::LParen => "`(`",
            TokKind::RParen => "`)`",
            TokKind::LBrace => "`{`",
            TokKind::RBrace => "`}`",
            TokKind::LBracket => "`[`",
            TokKind::RBracket => "`]`",
            TokKind::Semi => "`;`",
            TokKind::Comma => "`,`",
            TokKind::Dot => "`.`",
            TokKind::Assign => "`=`",
            TokKind::Plus => "`+`",
            TokKind::Minus => "`-`",
            TokKind::Star => "`*`",
            TokKind::Slash => "`/`",
            TokKind::Percent => "`%`",
            TokKind::Lt => "`<`",
            TokKind::Le => "`<=`",
            TokKind::Gt => "`>`",
            TokKind::Ge => "`>=`",
            TokKind::EqEq => "`==`",
            TokKind::Ne => "`!=`",
            TokKind::AndAnd => "`&&`",
            TokKind::OrOr => "`||`",
            TokKind::Bang => "`!`",
            TokKind::Eof => "end of input",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    let n = chars.len();

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

    while i < n {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '/' {
            while i < n && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '*' {
            let (sl, sc) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= n {
                    return Err(ParseError {
                        line: sl,
                        col: sc,
                        expected: "closing `*/`".to_string(),
                    });
                }
                if chars[i] == '*' && i + 1 < n && chars[i + 1] == '/' {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < n && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                bump!();
            }
            out.push(Token {
                kind: TokKind::Int,
                text: s,
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < n && (chars[i].is_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            let kind = match s.as_str() {
                "int" => TokKind::KwInt,
                "void" => TokKind::KwVoid,
                "record" => TokKind::KwRecord,
                "if" => TokKind::KwIf,
                "else" => TokKind::KwElse,
                "while" => TokKind::KwWhile,
                "return" => TokKind::KwReturn,
                "assume" => TokKind::KwAssume,
                _ => TokKind::Ident,
            };
            out.push(Token {
                kind,
                text: s,
                line: tl,
                col: tc,
            });
            continue;
        }
        let two = if i + 1 < n {
            Some((chars[i], chars[i + 1]))
        } else {
            None
        };
        let kind2 = match two {
            Some(('<', '=')) => Some(TokKind::Le),
            Some(('>', '=')) => Some(TokKind::Ge),
            Some(('=', '=')) => Some(TokKind::EqEq),
            Some(('!', '=')) => Some(TokKind::Ne),
            Some(('&', '&')) => Some(TokKind::AndAnd),
            Some(('|', '|')) => Some(TokKind::OrOr),
            _ => None,
        };
        if let Some(k) = kind2 {
            let text: String = chars[i..i + 2].iter().collect();
            bump!();
            bump!();
            out.push(Token {
                kind: k,
                text,
                line: tl,
                col: tc,
            });
            continue;
        }
        let kind1 = match c {
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            '{' => TokKind::LBrace,
            '}' => TokKind::RBrace,
            '[' => TokKind::LBracket,
            ']' => TokKind::RBracket,
            ';' => TokKind::Semi,
            ',' => TokKind::Comma,
            '.' => TokKind::Dot,
            '=' => TokKind::Assign,
            '+' => TokKind::Plus,
            '-' => TokKind::Minus,
            '*' => TokKind::Star,
            '/' => TokKind::Slash,
            '%' => TokKind::Percent,
            '<' => TokKind::Lt,
            '>' => TokKind::Gt,
            '!' => TokKind::Bang,
            _ => {
                return Err(ParseError {
                    line: tl,
                    col: tc,
                    expected: format!("a token (found `{c}`)"),
                })
            }
        };
        bump!();
        out.push(Token {
            kind: kind1,
            text: c.to_string(),
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        kind: TokKind::Eof,
        text: String::new(),
        line,
        col,
    });
    Ok(out)
}
