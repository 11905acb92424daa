#pragma once

#include <set>
#include <sstream>
#include <string>

#include "refdial/common.hpp"

namespace refdial::text {

// Standard English stopword list with numerals and spatial prepositions
// removed, so that counting words and location words survive filtering and
// stay available as discriminative content. data/stopwords_en.txt in the
// repository carries the same list; a test keeps the two in sync.
inline const std::string& stopword_list_text() {
  static const std::string text = R"RDSW(a
about
after
afterwards
again
all
almost
alone
along
already
also
although
always
am
among
amongst
amount
an
and
another
any
anyhow
anyone
anything
anyway
anywhere
are
around
as
at
back
be
became
because
become
becomes
becoming
been
before
beforehand
being
besides
both
but
by
ca
call
can
cannot
could
did
do
does
doing
done
due
during
each
either
else
elsewhere
empty
enough
etc
even
ever
every
everyone
everything
everywhere
except
few
for
former
formerly
from
full
further
get
give
go
had
has
have
he
hence
her
here
hereafter
hereby
herein
hereupon
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
indeed
into
is
it
its
itself
just
keep
last
latter
latterly
least
less
made
make
many
may
me
meanwhile
might
mine
more
moreover
most
mostly
much
must
my
myself
name
namely
neither
never
nevertheless
next
no
nobody
none
noone
nor
not
nothing
now
nowhere
of
often
on
once
only
onto
or
other
others
otherwise
our
ours
ourselves
out
own
part
per
perhaps
please
put
quite
rather
re
really
regarding
same
say
see
seem
seemed
seeming
seems
serious
several
she
should
show
side
since
so
some
somehow
someone
something
sometime
sometimes
somewhere
still
such
take
than
that
the
their
them
themselves
then
thence
there
thereafter
thereby
therefore
therein
thereupon
these
they
this
those
though
through
throughout
thru
thus
to
together
too
toward
towards
unless
until
upon
us
used
using
various
very
via
was
we
well
were
what
whatever
when
whence
whenever
where
whereafter
whereas
whereby
wherein
whereupon
wherever
whether
which
while
whither
who
whoever
whole
whom
whose
why
will
with
within
would
yet
you
your
yours
yourself
yourselves
)RDSW";
  return text;
}

inline const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = [] {
    std::set<std::string> s;
    std::istringstream in(stopword_list_text());
    std::string w;
    while (std::getline(in, w)) {
      if (!w.empty()) s.insert(w);
    }
    return s;
  }();
  return words;
}

inline bool is_stopword(const std::string& token) {
  return default_stopwords().count(token) > 0;
}

}  // namespace refdial::text
