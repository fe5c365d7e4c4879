"""Classification groups for commuting permutation pairs up to conjugacy.

The two loops of a torus commute in its fundamental group, so only
commuting pairs (sigma1, sigma2) are realised by gapped bands. sigma1 runs
over cycle-type representatives and sigma2 over its centraliser, up to
duplicates of the resulting line.
"""

import argparse
import itertools

from nhbands.algebra import Permutation, classification_group


def partitions(n, largest=None):
    largest = largest or n
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in partitions(n - k, k):
            yield (k,) + rest


def representative(n, shape):
    perm, start = Permutation.identity(n), 1
    for length in shape:
        if length > 1:
            perm = Permutation.cycle(n, *range(start, start + length)) * perm
        start += length
    return perm


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--max-n", type=int, default=5)
    args = p.parse_args()

    for n in range(2, args.max_n + 1):
        seen = set()
        for shape in partitions(n):
            a = representative(n, shape)
            for images in itertools.permutations(range(1, n + 1)):
                b = Permutation(images)
                if a * b != b * a:
                    continue
                key = (str(a), tuple(sorted(len(c) for c in b.cycles())), str(classification_group(a, b)))
                if key in seen:
                    continue
                seen.add(key)
                print(f"N={n}  sigma1={a!s:<16} sigma2={b!s:<16} {classification_group(a, b)}")


if __name__ == "__main__":
    main()
