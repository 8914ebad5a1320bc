//! Flat `key=value` certificate blocks.

use std::fmt::Write;

use seleq_core::{Procedure, TestSet};

/// Longest `pi` table printed in full; longer tables print their length.
const PI_PRINT_MAX: usize = 12;

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub trait Field {
    fn render(&self) -> String;
}

impl Field for f64 {
    fn render(&self) -> String {
        num(*self)
    }
}

macro_rules! plain_field {
    ($($t:ty),*) => {
        $(impl Field for $t {
            fn render(&self) -> String {
                self.to_string()
            }
        })*
    };
}

plain_field!(bool, usize, u64, str, String);

impl<T: Field + ?Sized> Field for &T {
    fn render(&self) -> String {
        (**self).render()
    }
}

#[derive(Default)]
pub struct Block {
    text: String,
}

impl Block {
    pub fn new(command: &str) -> Self {
        let mut b = Self::default();
        b.put("command", command);
        b
    }

    pub fn put(&mut self, key: &str, value: impl Field) -> &mut Self {
        writeln!(self.text, "{key}={}", value.render()).expect("writing to a String");
        self
    }

    pub fn list(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let v: Vec<String> = values.iter().map(|&x| num(x)).collect();
        self.put(key, format!("[{}]", v.join(",")))
    }

    pub fn opt(&mut self, key: &str, value: Option<impl Field>) -> &mut Self {
        match value {
            Some(v) => self.put(key, v),
            None => self.put(key, "none"),
        }
    }

    pub fn test(&mut self, prefix: &str, set: &TestSet, index: Option<usize>, pi: &[f64]) -> &mut Self {
        self.opt(&format!("{prefix}.test_index"), index);
        if let Some((s, d)) = index.and_then(|i| set.params(i)) {
            self.put(&format!("{prefix}.sigma"), s);
            self.put(&format!("{prefix}.d"), d);
        }
        if pi.len() <= PI_PRINT_MAX {
            self.list(&format!("{prefix}.pi"), pi)
        } else {
            self.put(&format!("{prefix}.pi_len"), pi.len())
        }
    }

    pub fn procedure(&mut self, prefix: &str, set: &TestSet, p: &Procedure, wages: bool) -> &mut Self {
        self.test(prefix, set, set.index_of(&p.test), p.test.pi());
        self.put(&format!("{prefix}.alpha_h"), p.alpha_h);
        self.put(&format!("{prefix}.alpha_l"), p.alpha_l);
        if wages {
            self.put(&format!("{prefix}.wage_h"), p.wage_h);
            self.put(&format!("{prefix}.wage_l"), p.wage_l);
        }
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}
