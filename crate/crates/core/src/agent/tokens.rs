//! Token estimation. The default estimator is a byte heuristic; exact
//! tokenizers can be plugged in through [`TokenEstimator`].

pub trait TokenEstimator: Send + Sync {
    fn count(&self, text: &str) -> u64;
}

/// `ceil(bytes / 4)`.
#[derive(Debug, Default, Clone, Copy)]
pub struct ByteEstimator;

impl TokenEstimator for ByteEstimator {
    fn count(&self, text: &str) -> u64 {
        (text.len() as u64).div_ceil(4)
    }
}

/// Token count under the default estimator.
pub fn count_tokens(text: &str) -> u64 {
    ByteEstimator.count(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_heuristic() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("12345678"), 2);
        assert_eq!(count_tokens("123456789"), 3);
        assert_eq!(count_tokens(&"x".repeat(4096)), 1024);
    }
}
