"""Hindley-Milner typing cases: phrase text and the exact printed type.

Expected strings were worked out by hand; they are not read back from the
inferencer.  Negative cases give the diagnostic text after ``Type error: ``.
"""

POSITIVE = [
    ("42", "int"),
    ("3.5", "float"),
    ("true", "bool"),
    ("()", "unit"),
    ('"hi"', "string"),
    ("fun x -> x + 1", "int -> int"),
    ("fun x -> x", "'a -> 'a"),
    ("fun x y -> x", "'a -> 'b -> 'a"),
    ("fun x y -> y", "'a -> 'b -> 'b"),
    ("fun f x -> f x", "('a -> 'b) -> 'a -> 'b"),
    ("fun f g x -> f (g x)", "('a -> 'b) -> ('c -> 'a) -> 'c -> 'b"),
    ("let id = fun x -> x in (id 1, id true)", "int * bool"),
    ("fun x -> (x, x)", "'a -> 'a * 'a"),
    ("fun p -> let (a, b) = p in (b, a)", "'a * 'b -> 'b * 'a"),
    ("[|1; 2; 3|]", "int array"),
    ("[|1.0; 0.5|]", "float array"),
    ("fun a -> a.(0)", "'a array -> 'a"),
    ("fun a i v -> a.(i) <- v", "'a array -> int -> 'a -> unit"),
    ("fun x -> x +. 1.0", "float -> float"),
    ("fun x y -> x < y", "int -> int -> bool"),
    ("fun b -> if b then 1 else 2", "bool -> int"),
    ("fun b x -> if b then x else x", "bool -> 'a -> 'a"),
    ("let rec fact n = if n = 0 then 1 else n * fact (n - 1) in fact", "int -> int"),
    ("let rec even n = if n = 0 then true else even (n - 2) in even", "int -> bool"),
    ("fun n -> for i = 1 to n do print_int i done", "int -> unit"),
    ("fun c -> while c () do () done", "(unit -> bool) -> unit"),
    ("fun f -> (f 1, f 2)", "(int -> 'a) -> 'a * 'a"),
    ("((fun x -> x), 1)", "('a -> 'a) * int"),
    ("fun x -> float_of_int x *. 2.0", "int -> float"),
    ("fun s -> string_length s > 0 && true", "string -> bool"),
]

# value restriction: the root is generalized only for syntactic values
WEAK = [
    ("(fun x -> x) (fun y -> y)", "'_a -> '_a"),
    ("let rec loop x = loop x in loop", "'_a -> '_b"),
    ("let a = [||] in a", "'_a array"),
]

NEGATIVE = [
    ("fun x -> x x", "occurs check: the type variable 'a occurs inside 'a -> 'b"),
    ("let rec f x = f in f", "occurs check: the type variable 'a occurs inside 'a -> 'b"),
    ("1 + true", "this expression has type bool but an expression was expected of type int"),
    ("1 +. 2.0", "this expression has type int but an expression was expected of type float"),
    ("if 1 then 2 else 3", "this expression has type int but an expression was expected of type bool"),
    ("if true then 1 else 2.0",
     "this expression has type float but an expression was expected of type int"),
    ("[|1; true|]", "this expression has type bool but an expression was expected of type int"),
    ("(fun x -> x + 1) 1.5",
     "this expression has type float but an expression was expected of type int"),
    ("undefined_name", "unbound value undefined_name"),
    ("let (a, b) = (1, 2, 3) in a",
     "this expression has type int * int * int but an expression was expected of type 'a * 'b"),
    ("fun a -> a.(true)", "this expression has type bool but an expression was expected of type int"),
    ("1.5 < 2.5", "this expression has type float but an expression was expected of type int"),
    ("fun f -> (f 1, f true)",
     "this expression has type bool but an expression was expected of type int"),
    ("let r = [||]",
     "the type of this expression, '_a array, contains type variables that cannot be generalized"),
    ("let g = (fun x -> x) (fun y -> y)",
     "the type of this expression, '_a -> '_a, contains type variables that cannot be generalized"),
]
