//! Parsing for the `name:key=value,key=value` text forms used on the command line.

use crate::error::{Error, Result};

pub(crate) struct Tagged<'a> {
    pub name: &'a str,
    params: Vec<(&'a str, &'a str)>,
    source: &'a str,
}

impl<'a> Tagged<'a> {
    pub fn parse(source: &'a str) -> Result<Self> {
        let source = source.trim();
        let (name, rest) = match source.split_once(':') {
            Some((name, rest)) => (name.trim(), Some(rest)),
            None => (source, None),
        };
        let mut params = Vec::new();
        if let Some(rest) = rest {
            for item in rest.split(',') {
                let (k, v) = item.split_once('=').ok_or_else(|| {
                    Error::invalid(format!("expected key=value in `{source}`, got `{item}`"))
                })?;
                params.push((k.trim(), v.trim()));
            }
        }
        Ok(Tagged {
            name,
            params,
            source,
        })
    }

    fn raw(&self, key: &str) -> Result<&'a str> {
        self.params
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                Error::invalid(format!("`{}` is missing parameter `{key}`", self.source))
            })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.raw(key)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::invalid(format!("`{key}={v}` is not a finite number")))
    }

    pub fn u32(&self, key: &str) -> Result<u32> {
        let v = self.raw(key)?;
        v.parse::<u32>()
            .map_err(|_| Error::invalid(format!("`{key}={v}` is not a non-negative integer")))
    }

    /// Rejects parameters outside `allowed`.
    pub fn only(self, allowed: &[&str]) -> Result<Self> {
        for (k, _) in &self.params {
            if !allowed.contains(k) {
                return Err(Error::invalid(format!(
                    "unknown parameter `{k}` in `{}`",
                    self.source
                )));
            }
        }
        Ok(self)
    }
}
