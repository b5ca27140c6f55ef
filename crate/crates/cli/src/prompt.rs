use std::fmt;
use std::io::{BufRead, Write};

/// Bad invocation: missing input, unknown choice. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Line-based questions: text goes to `out`, answers come from `input`.
pub struct Prompter<R, W> {
    input: R,
    out: W,
}

impl<R: BufRead, W: Write> Prompter<R, W> {
    pub fn new(input: R, out: W) -> Self {
        Prompter { input, out }
    }

    fn read_answer(&mut self, question: &str) -> anyhow::Result<String> {
        self.out.flush()?;
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            return Err(UsageError(format!("no answer given for \"{question}\"")).into());
        }
        Ok(line.trim().to_string())
    }

    /// Free text, possibly empty.
    pub fn text(&mut self, question: &str) -> anyhow::Result<String> {
        write!(self.out, "? {question} ")?;
        self.read_answer(question)
    }

    /// Free text that must not be empty; asks again until it is.
    pub fn required(&mut self, question: &str) -> anyhow::Result<String> {
        loop {
            let answer = self.text(question)?;
            if !answer.is_empty() {
                return Ok(answer);
            }
            writeln!(self.out, "  a value is required")?;
        }
    }

    /// Pick one option by number or by its exact text. Returns its index.
    pub fn select(&mut self, question: &str, options: &[String]) -> anyhow::Result<usize> {
        if options.is_empty() {
            return Err(UsageError(format!("nothing to choose for \"{question}\"")).into());
        }
        writeln!(self.out, "? {question}")?;
        for (i, option) in options.iter().enumerate() {
            writeln!(self.out, "  {}) {option}", i + 1)?;
        }
        loop {
            write!(self.out, "  choice: ")?;
            let answer = self.read_answer(question)?;
            if let Some(i) = pick(&answer, options) {
                return Ok(i);
            }
            writeln!(self.out, "  enter a number between 1 and {}", options.len())?;
        }
    }

    /// Like [`select`](Self::select), but any other non-empty answer is
    /// returned verbatim as `Err`.
    pub fn select_or_enter(&mut self, question: &str, options: &[String]) -> anyhow::Result<Result<usize, String>> {
        writeln!(self.out, "? {question}")?;
        for (i, option) in options.iter().enumerate() {
            writeln!(self.out, "  {}) {option}", i + 1)?;
        }
        loop {
            write!(self.out, "  choice or value: ")?;
            let answer = self.read_answer(question)?;
            if answer.is_empty() {
                continue;
            }
            return Ok(pick(&answer, options).ok_or(answer));
        }
    }

    /// Yes/no with a default for an empty answer.
    pub fn confirm(&mut self, question: &str, default: bool) -> anyhow::Result<bool> {
        let hint = if default { "Y/n" } else { "y/N" };
        loop {
            write!(self.out, "? {question} ({hint}) ")?;
            match self.read_answer(question)?.to_ascii_lowercase().as_str() {
                "" => return Ok(default),
                "y" | "yes" => return Ok(true),
                "n" | "no" => return Ok(false),
                _ => writeln!(self.out, "  answer yes or no")?,
            }
        }
    }
}

fn pick(answer: &str, options: &[String]) -> Option<usize> {
    if let Ok(n) = answer.parse::<usize>() {
        return (1..=options.len()).contains(&n).then(|| n - 1);
    }
    options.iter().position(|o| o == answer)
}
