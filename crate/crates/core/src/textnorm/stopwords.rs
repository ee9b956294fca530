//! Bundled English stopword list (standard ~180-word function-word list).
//!
//! Entries are already lowercase and purely alphabetic, matching the token
//! alphabet after normalization. Contraction remnants are listed in their
//! bare form ("aren", "wasn") because apostrophes are stripped before the
//! stopword pass. Overridable with `--stopwords PATH`.

pub static STOPWORDS_EN: &str = "\
a
about
above
after
again
against
ain
all
also
although
am
among
an
and
any
anyone
anything
are
aren
as
at
be
because
been
before
being
below
between
both
but
by
came
can
cannot
could
couldn
did
didn
do
does
doesn
doing
don
down
during
each
either
else
ever
every
everyone
everything
few
for
from
further
had
hadn
has
hasn
have
haven
having
he
hence
her
here
hers
herself
him
himself
his
how
however
i
if
in
into
is
isn
it
its
itself
just
ma
may
me
might
mightn
more
most
must
mustn
my
myself
needn
neither
never
no
nor
not
nothing
now
of
off
on
once
only
onto
or
other
ought
our
ours
ourselves
out
over
own
same
shall
shan
she
should
shouldn
so
some
someone
something
such
than
that
the
their
theirs
them
themselves
then
there
therefore
these
they
this
those
though
through
thus
to
too
under
until
up
upon
very
via
was
wasn
we
were
weren
what
when
where
whether
which
while
who
whom
why
will
with
won
would
wouldn
yet
you
your
yours
yourself
yourselves
";
