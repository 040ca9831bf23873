//! Line-oriented scanner for Python source.
//!
//! Distinguishes comments from string contents without a full parse, so that
//! a `#` inside a string literal is never mistaken for a comment. Tracks
//! single- and triple-quoted strings across lines, escape sequences, and
//! backslash line continuations inside strings.

/// One scanned physical line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScannedLine {
    /// Line content with any trailing comment removed.
    pub code: String,
    /// True when a `#` comment (outside any string) occurs on this line.
    pub has_comment: bool,
}

impl ScannedLine {
    /// True when nothing but whitespace remains after comment removal.
    pub fn is_blank(&self) -> bool {
        self.code.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Code,
    Str { quote: char, triple: bool },
}

/// Scan a sequence of physical lines as one source body.
///
/// String state carries over between lines (triple-quoted strings, and
/// single-quoted strings continued with a trailing backslash). Unterminated
/// single-quoted strings are closed at end of line so one bad line cannot
/// poison the rest of the file.
pub fn scan_source<S: AsRef<str>>(lines: &[S]) -> Vec<ScannedLine> {
    let mut out = Vec::with_capacity(lines.len());
    let mut state = State::Code;

    for raw in lines {
        let chars: Vec<char> = raw.as_ref().chars().collect();
        let mut code = String::with_capacity(chars.len());
        let mut has_comment = false;
        let mut escaped_eol = false;
        let mut i = 0;

        while i < chars.len() {
            let c = chars[i];
            match state {
                State::Str { quote, triple } => {
                    if c == '\\' {
                        code.push(c);
                        if i + 1 < chars.len() {
                            code.push(chars[i + 1]);
                            i += 2;
                        } else {
                            escaped_eol = true;
                            i += 1;
                        }
                    } else if c == quote {
                        if triple {
                            if i + 2 < chars.len() && chars[i + 1] == quote && chars[i + 2] == quote
                            {
                                code.push(quote);
                                code.push(quote);
                                code.push(quote);
                                i += 3;
                                state = State::Code;
                            } else {
                                code.push(c);
                                i += 1;
                            }
                        } else {
                            code.push(c);
                            i += 1;
                            state = State::Code;
                        }
                    } else {
                        code.push(c);
                        i += 1;
                    }
                }
                State::Code => {
                    if c == '#' {
                        has_comment = true;
                        break;
                    } else if c == '\'' || c == '"' {
                        if i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c {
                            code.push(c);
                            code.push(c);
                            code.push(c);
                            i += 3;
                            state = State::Str { quote: c, triple: true };
                        } else {
                            code.push(c);
                            i += 1;
                            state = State::Str { quote: c, triple: false };
                        }
                    } else {
                        code.push(c);
                        i += 1;
                    }
                }
            }
        }

        // Unterminated single-quoted string: recover unless the line ended
        // with a string-continuation backslash.
        if let State::Str { triple: false, .. } = state {
            if !escaped_eol {
                state = State::Code;
            }
        }

        out.push(ScannedLine { code, has_comment });
    }

    out
}

/// True for a `#!...` interpreter line.
pub fn is_shebang(line: &str) -> bool {
    line.starts_with("#!")
}

/// True for a PEP 263 style encoding declaration (`# -*- coding: utf-8 -*-`).
///
/// Only meaningful on the first two lines of a unit.
pub fn is_encoding_decl(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('#') && (t.contains("coding:") || t.contains("coding="))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(lines: &[&str]) -> Vec<ScannedLine> {
        scan_source(lines)
    }

    #[test]
    fn trailing_comment_is_detected() {
        let s = scan(&["x = 1  # set x"]);
        assert!(s[0].has_comment);
        assert_eq!(s[0].code, "x = 1  ");
    }

    #[test]
    fn hash_inside_string_is_not_a_comment() {
        let s = scan(&["x = \"a # b\"", "y = 'c#d'  # real"]);
        assert!(!s[0].has_comment);
        assert_eq!(s[0].code, "x = \"a # b\"");
        assert!(s[1].has_comment);
        assert_eq!(s[1].code, "y = 'c#d'  ");
    }

    #[test]
    fn triple_quoted_string_spans_lines() {
        let s = scan(&["x = \"\"\"start", "# not a comment", "end\"\"\"", "# yes"]);
        assert!(!s[0].has_comment);
        assert!(!s[1].has_comment);
        assert_eq!(s[1].code, "# not a comment");
        assert!(!s[2].has_comment);
        assert!(s[3].has_comment);
    }

    #[test]
    fn escaped_quote_stays_in_string() {
        let s = scan(&["x = 'it\\'s # fine'  # c"]);
        assert!(s[0].has_comment);
        assert_eq!(s[0].code, "x = 'it\\'s # fine'  ");
    }

    #[test]
    fn unterminated_string_recovers_next_line() {
        let s = scan(&["x = 'oops", "y = 2  # c"]);
        assert!(s[1].has_comment);
    }

    #[test]
    fn comment_only_line() {
        let s = scan(&["# done"]);
        assert!(s[0].has_comment);
        assert!(s[0].is_blank());
    }

    #[test]
    fn shebang_and_encoding_helpers() {
        assert!(is_shebang("#!/usr/bin/env python3"));
        assert!(!is_shebang("# plain"));
        assert!(is_encoding_decl("# -*- coding: utf-8 -*-"));
        assert!(is_encoding_decl("# coding=latin-1"));
        assert!(!is_encoding_decl("x = 1"));
    }
}
