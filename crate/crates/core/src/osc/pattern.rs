use super::OscError;

/// OSC 1.0 address pattern matching.
///
/// `?` matches one character, `*` any run, `[a-z]` / `[!a-z]` one character
/// from (or outside) a class, and `{foo,bar}` one of the listed strings.
/// Wildcards never match `/`.
pub fn match_address(pattern: &str, address: &str) -> Result<bool, OscError> {
    let bad = |reason| OscError::BadPattern {
        pattern: pattern.to_owned(),
        reason,
    };
    if !pattern.starts_with('/') {
        return Err(bad("pattern must begin with '/'"));
    }
    let pat: Vec<char> = pattern.chars().collect();
    let mut i = 0;
    while i < pat.len() {
        let close = match pat[i] {
            '[' => ']',
            '{' => '}',
            _ => {
                i += 1;
                continue;
            }
        };
        match pat[i + 1..].iter().position(|&c| c == close) {
            Some(off) => i += off + 2,
            None if close == ']' => return Err(bad("unterminated '['")),
            None => return Err(bad("unterminated '{'")),
        }
    }
    if !address.starts_with('/') {
        return Ok(false);
    }
    let addr: Vec<char> = address.chars().collect();
    Ok(match_from(&pat, &addr))
}

fn match_from(pat: &[char], addr: &[char]) -> bool {
    let Some(&head) = pat.first() else {
        return addr.is_empty();
    };
    match head {
        '?' => matches!(addr.first(), Some(&c) if c != '/') && match_from(&pat[1..], &addr[1..]),
        '*' => {
            let rest = {
                let stars = pat.iter().take_while(|&&c| c == '*').count();
                &pat[stars..]
            };
            for k in 0..=addr.len() {
                if k > 0 && addr[k - 1] == '/' {
                    break;
                }
                if match_from(rest, &addr[k..]) {
                    return true;
                }
            }
            false
        }
        '[' => {
            let end = pat.iter().position(|&c| c == ']').expect("validated");
            match addr.first() {
                Some(&c) if c != '/' && class_contains(&pat[1..end], c) => {
                    match_from(&pat[end + 1..], &addr[1..])
                }
                _ => false,
            }
        }
        '{' => {
            let end = pat.iter().position(|&c| c == '}').expect("validated");
            pat[1..end].split(|&c| c == ',').any(|alt| {
                addr.len() >= alt.len()
                    && &addr[..alt.len()] == alt
                    && match_from(&pat[end + 1..], &addr[alt.len()..])
            })
        }
        c => addr.first() == Some(&c) && match_from(&pat[1..], &addr[1..]),
    }
}

fn class_contains(class: &[char], c: char) -> bool {
    let (negate, body) = match class.split_first() {
        Some(('!', rest)) => (true, rest),
        _ => (false, class),
    };
    let mut hit = false;
    let mut i = 0;
    while i < body.len() {
        if i + 2 < body.len() && body[i + 1] == '-' {
            hit |= body[i] <= c && c <= body[i + 2];
            i += 3;
        } else {
            hit |= body[i] == c;
            i += 1;
        }
    }
    hit != negate
}
