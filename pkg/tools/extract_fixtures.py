# One-shot helper used while assembling the prompt fixture files from the
# source document. Kept for provenance of the byte-exact extraction; not part
# of the installed package.
import sys
from pathlib import Path

SRC = Path(sys.argv[1] if len(sys.argv) > 1 else "paper.md")
OUT = Path("src/aot_harness/prompts/fixtures")

# (output path, first line AFTER \begin{lstlisting}, last line BEFORE \end{lstlisting})
BLOCKS = [
    ("game24/aot_dfs.txt", 459, 811),
    ("game24/aot_long.txt", 816, 1153),
    ("game24/aot_random.txt", 1158, 1213),
    ("game24/aot_bfs.txt", 1218, 1762),
    ("game24/aot_short.txt", 1768, 1977),
    ("crossword/aot.txt", 1991, 2253),
    ("crossword/propose_words.txt", 2258, 2282),
    ("writing/aot.txt", 2288, 2318),
    ("writing/score.txt", 2322, 2325),
]

lines = SRC.read_text(encoding="utf-8").splitlines(keepends=True)
for rel, first, last in BLOCKS:
    body = "".join(lines[first - 1 : last])
    dest = OUT / rel
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(body, encoding="utf-8")
    print(f"{rel}: {last - first + 1} lines")
