"""Benchmark program sources used by the CLI and the experiment sweeps."""

PALINDROME = """\
% Random string over {a,b}; evidence: it reads the same both ways;
% query: it contains a given number of a's.
genlist(0, []).
genlist(N, L) :-
    N > 0,
    msw(flip, N, X),
    L = [X|L1],
    N1 is N - 1,
    genlist(N1, L1).

evidence(N) :- genlist(N, L), palindrome(L).

query(N, K) :- genlist(N, L), count_as(L, K).

palindrome(L) :- phrase(palindrome, L).
palindrome --> [].
palindrome --> [_X].
palindrome --> [X], palindrome, [X].

count_as([], 0).
count_as([X|Xs], K) :-
    count_as(Xs, L),
    (X = a -> K is L + 1 ; K = L).

values(flip, [a, b]).
set_sw(flip, [0.5, 0.5]).
"""

BIRTHDAY = """\
% Do at least two of N people share a birthday?
same_birthday(N) :-
    person(N, P1),
    msw(b, P1, D),
    person(N, P2),
    P1 < P2,
    msw(b, P2, D).

person(N, P) :- for(P, 1, N).

:- set_sw(b, uniform(1, 365)).
"""


def birthday_source(days: int = 365) -> str:
    return BIRTHDAY.replace("uniform(1, 365)", f"uniform(1, {days})")
